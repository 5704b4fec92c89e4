//! Autonomous vector fields and the classical fourth-order Runge-Kutta step.

use crate::error::{check_dim, Error, Result};

/// An autonomous vector field on the primal chart together with the volume
/// data needed to measure its compressibility.
pub trait Flow: Send + Sync {
    fn dim(&self) -> usize;

    /// `dU/dt` at `u`.
    fn field(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// Compressibility of the field relative to the flow's volume form.
    fn kappa(&self, u: &[f64]) -> Result<f64>;

    /// Density of the volume form in the primal chart.
    fn sqrt_det(&self, u: &[f64]) -> Result<f64>;
}

/// One RK4 step of `dy/dt = f(y)`.
pub fn rk4_step<F>(f: &F, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let n = y.len();
    let k1 = f(y)?;
    check_dim(n, k1.len())?;
    let stage = |k: &[f64], scale: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + scale * k).collect() };
    let k2 = f(&stage(&k1, 0.5 * dt))?;
    let k3 = f(&stage(&k2, 0.5 * dt))?;
    let k4 = f(&stage(&k3, dt))?;
    let next: Vec<f64> = (0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if let Some(i) = next.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("state component {i} became {}", next[i])));
    }
    Ok(next)
}

/// Central-difference Jacobian `J[i][j] = d f_i / d y_j`, row-major.
pub fn jacobian_fd<F>(f: &F, y: &[f64], scale: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let n = y.len();
    let mut jac = vec![0.0; n * n];
    let mut x = y.to_vec();
    for j in 0..n {
        let h = scale * y[j].abs().max(1.0);
        x[j] = y[j] + h;
        let fp = f(&x)?;
        x[j] = y[j] - h;
        let fm = f(&x)?;
        x[j] = y[j];
        check_dim(n, fp.len())?;
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Jacobian has non-finite entries".into()));
    }
    Ok(jac)
}
