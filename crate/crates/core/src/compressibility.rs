//! Phase-space compressibility of generalized Hopfield flows.
//!
//! For the Riemannian volume form of the Hessian metric, the flow generated
//! by `H` contracts volume at the rate `kappa = -Lap_g H`. Three independent
//! evaluations are provided:
//!
//! * [`kappa_closed_form`]: the separable-potential formula
//!   `-sum_a (1/psi'') [ psi''' dH/dV_a / 2 + psi''^2 d^2H/dV_a^2 ]`;
//! * [`kappa_laplacian`]: minus the Laplace-Beltrami operator applied to
//!   `H(V(U))` by finite differences;
//! * [`kappa_divergence_oracle`]: the weighted divergence
//!   `(1/sqrt|g|) d_a (sqrt|g| Xdot^a)` of the flow field itself.
//!
//! [`volume_contraction_run`] checks the integrated form of the same
//! statement against the variational equation.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{laplace_beltrami, metric_at, weighted_divergence, HessianPotential, MetricField, StepRule};
use crate::models::{cohen_grossberg_field, vector_field_general, CohenGrossbergSpec, EnergyFunction};
use crate::ode::{jacobian_fd, rk4_step, Flow};
use crate::potentials::{ConvexPotential, SeparablePotential};

/// Compressibility at one point by all three routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub point_u: Vec<f64>,
    pub kappa_closed_form: f64,
    pub kappa_laplacian: f64,
    pub kappa_divergence: f64,
    pub max_pairwise_residual: f64,
}

impl KappaReport {
    pub fn new(point_u: Vec<f64>, closed: f64, laplacian: f64, divergence: f64) -> Self {
        let max_pairwise_residual = (closed - laplacian)
            .abs()
            .max((closed - divergence).abs())
            .max((laplacian - divergence).abs());
        Self {
            point_u,
            kappa_closed_form: closed,
            kappa_laplacian: laplacian,
            kappa_divergence: divergence,
            max_pairwise_residual,
        }
    }

    /// Cross-route tolerance `1e-4 * max(1, |kappa|)`.
    pub fn tolerance(&self) -> f64 {
        1e-4 * self.kappa_closed_form.abs().max(1.0)
    }

    pub fn routes_agree(&self) -> bool {
        self.max_pairwise_residual <= self.tolerance()
    }
}

/// Separable closed form.
pub fn kappa_closed_form<P>(energy: &EnergyFunction, potential: &P, u: &[f64]) -> Result<f64>
where
    P: HessianPotential + ?Sized,
{
    let sp = potential.as_separable().ok_or_else(|| {
        Error::UnsupportedRoute(
            "closed-form compressibility needs a separable potential; use the Laplacian route".into(),
        )
    })?;
    let chart = sp.chart(u)?;
    let grad = energy.grad(u, &chart.v)?;
    let hess = energy.hess_diag(u, &chart.v)?;
    let mut kappa = 0.0;
    for a in 0..u.len() {
        let (g, t) = (chart.d2[a], chart.d3[a]);
        if !(g > 0.0) {
            return Err(Error::Geometry(format!("psi''(U^{a}) = {g}")));
        }
        kappa -= (0.5 * t * grad[a] + g * g * hess[a]) / g;
    }
    Ok(kappa)
}

/// `-Lap_g (H o V)` at `u`.
pub fn kappa_laplacian<P>(energy: &EnergyFunction, potential: &P, u: &[f64], steps: &StepRule) -> Result<f64>
where
    P: HessianPotential + ?Sized,
{
    let h_of_u = |x: &[f64]| -> Result<f64> {
        let v = potential.dual_coordinates(x)?;
        energy.value(x, &v)
    };
    Ok(-laplace_beltrami(potential, &h_of_u, u, steps)?)
}

/// Weighted divergence of `field` with respect to the volume form of `metric`.
pub fn kappa_divergence_oracle<M, F>(field: &F, metric: &M, u: &[f64], steps: &StepRule) -> Result<f64>
where
    M: MetricField + ?Sized,
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    weighted_divergence(metric, &|x: &[f64], _: &_| field(x), u, steps)
}

/// All three routes at `u` with the default difference steps.
pub fn kappa_report(energy: &EnergyFunction, sp: &SeparablePotential, u: &[f64]) -> Result<KappaReport> {
    let steps = StepRule::default();
    let closed = kappa_closed_form(energy, sp, u)?;
    let laplacian = kappa_laplacian(energy, sp, u, &steps)?;
    let field = |x: &[f64]| vector_field_general(energy, sp, x);
    let divergence = kappa_divergence_oracle(&field, sp, u, &steps)?;
    Ok(KappaReport::new(u.to_vec(), closed, laplacian, divergence))
}

/// A generalized Hopfield system: an energy together with the separable
/// potential whose activation links the two charts.
#[derive(Debug, Clone)]
pub struct GeneralizedHopfield {
    pub energy: EnergyFunction,
    pub potential: SeparablePotential,
}

impl GeneralizedHopfield {
    pub fn new(energy: EnergyFunction, potential: SeparablePotential) -> Result<Self> {
        if let Some(n) = energy.dim() {
            check_dim(potential.dim(), n)?;
        }
        Ok(Self { energy, potential })
    }
}

impl Flow for GeneralizedHopfield {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        crate::models::vector_field(&self.energy, &self.potential, u)
    }

    fn kappa(&self, u: &[f64]) -> Result<f64> {
        kappa_closed_form(&self.energy, &self.potential, u)
    }

    fn sqrt_det(&self, u: &[f64]) -> Result<f64> {
        Ok(metric_at(&self.potential, u)?.sqrt_det)
    }
}

impl Flow for CohenGrossbergSpec {
    fn dim(&self) -> usize {
        CohenGrossbergSpec::dim(self)
    }

    fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        cohen_grossberg_field(self, u)
    }

    /// Relative to the Hessian volume of `psi`; no closed form is available
    /// once `A` varies, so the divergence is taken numerically.
    fn kappa(&self, u: &[f64]) -> Result<f64> {
        let sp = SeparablePotential::new(self.potential().clone(), self.dim())?;
        kappa_divergence_oracle(
            &|x: &[f64]| cohen_grossberg_field(self, x),
            &sp,
            u,
            &StepRule::default(),
        )
    }

    fn sqrt_det(&self, u: &[f64]) -> Result<f64> {
        let sp = SeparablePotential::new(self.potential().clone(), self.dim())?;
        Ok(metric_at(&sp, u)?.sqrt_det)
    }
}

fn euclidean(n: usize) -> SeparablePotential {
    SeparablePotential::new(ConvexPotential::Quadratic { coefficient: 1.0 }, n).expect("positive dimension")
}

/// `Xdot^a = -rate_a U^a` on Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub rates: Vec<f64>,
}

impl Flow for LinearField {
    fn dim(&self) -> usize {
        self.rates.len()
    }

    fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rates.len(), u.len())?;
        Ok(u.iter().zip(&self.rates).map(|(x, k)| -k * x).collect())
    }

    fn kappa(&self, u: &[f64]) -> Result<f64> {
        kappa_divergence_oracle(
            &|x: &[f64]| self.field(x),
            &euclidean(self.dim()),
            u,
            &StepRule::default(),
        )
    }

    fn sqrt_det(&self, _u: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// Harmonic oscillator `(qdot, pdot) = (p, -q)` with the symplectic volume.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarHamiltonian;

impl Flow for PlanarHamiltonian {
    fn dim(&self) -> usize {
        2
    }

    fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(2, u.len())?;
        Ok(vec![u[1], -u[0]])
    }

    fn kappa(&self, u: &[f64]) -> Result<f64> {
        kappa_divergence_oracle(&|x: &[f64]| self.field(x), &euclidean(2), u, &StepRule::default())
    }

    fn sqrt_det(&self, _u: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// Outcome of co-integrating the flow with its variational equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeLedger {
    pub u0: Vec<f64>,
    pub u_end: Vec<f64>,
    /// Time actually covered.
    pub t_end: f64,
    pub steps: usize,
    /// `ln[det M(T) sqrt|g(U(T))| / sqrt|g(U0)|]`.
    pub log_volume_ratio: f64,
    /// Simpson estimate of `int_0^T kappa(U(t)) dt` on the step nodes.
    pub kappa_integral: f64,
    pub absolute_discrepancy: f64,
    /// `absolute_discrepancy / |kappa_integral|`.
    pub relative_discrepancy: f64,
}

impl VolumeLedger {
    fn close(u0: Vec<f64>, u_end: Vec<f64>, t_end: f64, steps: usize, lhs: f64, rhs: f64) -> Self {
        let absolute_discrepancy = (lhs - rhs).abs();
        Self {
            u0,
            u_end,
            t_end,
            steps,
            log_volume_ratio: lhs,
            kappa_integral: rhs,
            absolute_discrepancy,
            relative_discrepancy: absolute_discrepancy / rhs.abs().max(f64::MIN_POSITIVE),
        }
    }
}

/// A volume run that stopped early, with the ledger up to the last good step.
#[derive(Debug, Clone, Error)]
#[error("volume run failed after {} steps: {cause}", partial.steps)]
pub struct VolumeRunError {
    pub partial: VolumeLedger,
    pub cause: Error,
}

/// Integrate `dU/dt = X(U)` and `dM/dt = (dX/dU) M`, `M(0) = I`, with RK4 and
/// compare the log volume change against the time integral of `kappa`.
pub fn volume_contraction_run<F>(
    flow: &F,
    u0: &[f64],
    t_end: f64,
    dt: f64,
) -> std::result::Result<VolumeLedger, VolumeRunError>
where
    F: Flow + ?Sized,
{
    let n = flow.dim();
    let fail = |cause: Error, ledger: VolumeLedger| VolumeRunError { partial: ledger, cause };
    let empty = VolumeLedger::close(u0.to_vec(), u0.to_vec(), 0.0, 0, 0.0, 0.0);
    if let Err(e) = check_dim(n, u0.len()) {
        return Err(fail(e, empty));
    }
    if !(dt > 0.0 && t_end > 0.0 && dt <= t_end) {
        return Err(fail(
            Error::Config(format!("need 0 < dt <= T, got dt = {dt}, T = {t_end}")),
            empty,
        ));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / steps as f64;

    let augmented = |y: &[f64]| -> Result<Vec<f64>> {
        let (u, m) = y.split_at(n);
        let mut out = flow.field(u)?;
        let jac = jacobian_fd(&|x: &[f64]| flow.field(x), u, 1e-5)?;
        for i in 0..n {
            for j in 0..n {
                out.push((0..n).map(|k| jac[i * n + k] * m[k * n + j]).sum());
            }
        }
        Ok(out)
    };

    let mut y: Vec<f64> = u0.to_vec();
    for i in 0..n {
        for j in 0..n {
            y.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    let sqrt_det0 = match flow.sqrt_det(u0) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, empty)),
    };
    let mut kappas = Vec::with_capacity(steps + 1);
    match flow.kappa(u0) {
        Ok(k) => kappas.push(k),
        Err(e) => return Err(fail(e, empty)),
    }

    let ledger_at = |y: &[f64], kappas: &[f64], done: usize| -> Result<VolumeLedger> {
        let (u, m) = y.split_at(n);
        let det = DMatrix::from_row_slice(n, n, m).determinant();
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::Numerical(format!("variational determinant is {det}")));
        }
        let lhs = det.ln() + (flow.sqrt_det(u)? / sqrt_det0).ln();
        let rhs = crate::quad::simpson_uniform(kappas, h);
        Ok(VolumeLedger::close(
            u0.to_vec(),
            u.to_vec(),
            done as f64 * h,
            done,
            lhs,
            rhs,
        ))
    };

    for step in 1..=steps {
        let next = rk4_step(&augmented, &y, h).and_then(|next| {
            let k = flow.kappa(&next[..n])?;
            Ok((next, k))
        });
        match next {
            Ok((next, k)) => {
                y = next;
                kappas.push(k);
            }
            Err(cause) => {
                let partial = ledger_at(&y, &kappas, step - 1).unwrap_or(empty);
                return Err(fail(cause, partial));
            }
        }
    }
    ledger_at(&y, &kappas, steps).map_err(|cause| fail(cause, empty))
}
