//! Hessian metric of a convex potential and the differential operators built
//! on it.
//!
//! The metric is `g_ab = d^2 Psi / dU^a dU^b`. Its inverse is the Hessian of
//! the Legendre dual in the `V` chart, and its volume density is
//! `sqrt(det g)`. On functions the Laplace-Beltrami operator is evaluated by
//! the coordinate formula
//!
//! ```text
//! Lap f = (1 / sqrt|g|) sum_ab d_a ( sqrt|g| g^ab d_b f )
//! ```
//!
//! using analytic metric data where the potential provides it and central
//! differences for the field being differentiated.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::models::EnergyFunction;
use crate::potentials::SeparablePotential;

/// Step rule for central differences: `h_a = scale * max(1, |U^a|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub scale: f64,
    /// Combine the estimates at `h` and `h/2` as `(4 D(h/2) - D(h)) / 3`.
    pub richardson: bool,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            scale: 1e-4,
            richardson: false,
        }
    }
}

impl StepRule {
    pub fn with_scale(scale: f64) -> Self {
        Self {
            scale,
            richardson: false,
        }
    }

    pub fn richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    pub fn step(&self, coordinate: f64) -> f64 {
        self.scale * coordinate.abs().max(1.0)
    }

    fn halved(&self) -> Self {
        Self {
            scale: 0.5 * self.scale,
            richardson: false,
        }
    }

    /// Apply Richardson extrapolation to an `O(h^2)` estimator if enabled.
    fn extrapolate<F>(&self, estimate: F) -> Result<f64>
    where
        F: Fn(&StepRule) -> Result<f64>,
    {
        let base = StepRule {
            richardson: false,
            ..*self
        };
        let coarse = estimate(&base)?;
        if !self.richardson {
            return Ok(coarse);
        }
        let fine = estimate(&base.halved())?;
        Ok((4.0 * fine - coarse) / 3.0)
    }
}

/// Metric components at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricComponents {
    /// Separable potential: `g_ab = delta_ab g_a(U^a)`. `third[a]` is
    /// `d g_aa / dU^a`.
    Diagonal {
        g: Vec<f64>,
        g_inv: Vec<f64>,
        third: Vec<f64>,
    },
    Full {
        g: DMatrix<f64>,
        g_inv: DMatrix<f64>,
    },
}

/// Metric data at one point of the primal chart.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMetricPoint {
    pub point_u: Vec<f64>,
    pub components: MetricComponents,
    pub sqrt_det: f64,
}

impl HessianMetricPoint {
    pub fn dim(&self) -> usize {
        self.point_u.len()
    }

    pub fn g(&self, a: usize, b: usize) -> f64 {
        match &self.components {
            MetricComponents::Diagonal { g, .. } => {
                if a == b {
                    g[a]
                } else {
                    0.0
                }
            }
            MetricComponents::Full { g, .. } => g[(a, b)],
        }
    }

    pub fn g_inv(&self, a: usize, b: usize) -> f64 {
        match &self.components {
            MetricComponents::Diagonal { g_inv, .. } => {
                if a == b {
                    g_inv[a]
                } else {
                    0.0
                }
            }
            MetricComponents::Full { g_inv, .. } => g_inv[(a, b)],
        }
    }

    /// Metric dual of a vector: `omega_b = g_ab X^a`.
    pub fn lower(&self, vector: &[f64]) -> Vec<f64> {
        match &self.components {
            MetricComponents::Diagonal { g, .. } => g.iter().zip(vector).map(|(g, x)| g * x).collect(),
            MetricComponents::Full { g, .. } => (g * DVector::from_column_slice(vector)).iter().copied().collect(),
        }
    }

    /// Inverse of [`lower`](Self::lower): `X^a = g^ab omega_b`.
    pub fn raise(&self, one_form: &[f64]) -> Vec<f64> {
        match &self.components {
            MetricComponents::Diagonal { g_inv, .. } => g_inv.iter().zip(one_form).map(|(g, w)| g * w).collect(),
            MetricComponents::Full { g_inv, .. } => {
                (g_inv * DVector::from_column_slice(one_form)).iter().copied().collect()
            }
        }
    }

    /// `g(X, X)`.
    pub fn norm_sq(&self, vector: &[f64]) -> f64 {
        self.lower(vector).iter().zip(vector).map(|(w, x)| w * x).sum()
    }

    /// Largest entry of `|g^-1 g - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let prod: f64 = (0..n).map(|c| self.g_inv(a, c) * self.g(c, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((prod - target).abs());
            }
        }
        worst
    }
}

/// Anything that can produce the metric at a point of the primal chart.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn metric_at(&self, u: &[f64]) -> Result<HessianMetricPoint>;
}

/// A potential whose Hessian defines the metric and whose gradient maps the
/// primal chart to the dual one.
pub trait HessianPotential: MetricField {
    /// `V_a = dPsi/dU^a`.
    fn dual_coordinates(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// The separable form, when the potential has one.
    fn as_separable(&self) -> Option<&SeparablePotential> {
        None
    }
}

impl MetricField for SeparablePotential {
    fn dim(&self) -> usize {
        SeparablePotential::dim(self)
    }

    fn metric_at(&self, u: &[f64]) -> Result<HessianMetricPoint> {
        metric_at(self, u)
    }
}

impl HessianPotential for SeparablePotential {
    fn dual_coordinates(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.to_dual(u)
    }

    fn as_separable(&self) -> Option<&SeparablePotential> {
        Some(self)
    }
}

/// Hessian metric of a separable potential: diagonal `psi''(U^a)`.
pub fn metric_at(sp: &SeparablePotential, u: &[f64]) -> Result<HessianMetricPoint> {
    let chart = sp.chart(u)?;
    for (a, &g) in chart.d2.iter().enumerate() {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Geometry(format!("psi''(U^{a}) = {g} at U^{a} = {}", chart.u[a])));
        }
    }
    let sqrt_det = chart.d2.iter().product::<f64>().sqrt();
    let g_inv = chart.d2.iter().map(|g| 1.0 / g).collect();
    Ok(HessianMetricPoint {
        point_u: chart.u,
        components: MetricComponents::Diagonal {
            g: chart.d2,
            g_inv,
            third: chart.d3,
        },
        sqrt_det,
    })
}

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Non-separable potential `Psi(U)`. Missing derivatives are produced by
/// central differences: the gradient from `value`, the Hessian from the
/// gradient when one is supplied and from second differences of `value`
/// otherwise.
#[derive(Clone)]
pub struct GeneralPotential {
    n: usize,
    value: PotentialFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
    steps: StepRule,
}

impl std::fmt::Debug for GeneralPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralPotential")
            .field("n", &self.n)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl GeneralPotential {
    pub fn new(n: usize, value: PotentialFn) -> Self {
        Self {
            n,
            value,
            gradient: None,
            hessian: None,
            steps: StepRule::default(),
        }
    }

    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn with_hessian(mut self, hessian: HessianFn) -> Self {
        self.hessian = Some(hessian);
        self
    }

    pub fn with_steps(mut self, steps: StepRule) -> Self {
        self.steps = steps;
        self
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        (self.value)(u)
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, u.len())?;
        check_finite(u, "U")?;
        let grad = match &self.gradient {
            Some(g) => g(u),
            None => {
                let mut x = u.to_vec();
                (0..self.n)
                    .map(|a| {
                        let h = self.steps.step(u[a]);
                        x[a] = u[a] + h;
                        let fp = (self.value)(&x);
                        x[a] = u[a] - h;
                        let fm = (self.value)(&x);
                        x[a] = u[a];
                        (fp - fm) / (2.0 * h)
                    })
                    .collect()
            }
        };
        check_finite(&grad, "dPsi")?;
        Ok(grad)
    }

    pub fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.n, u.len())?;
        check_finite(u, "U")?;
        let n = self.n;
        if let Some(h) = &self.hessian {
            return Ok(h(u));
        }
        let mut hess = DMatrix::zeros(n, n);
        let mut x = u.to_vec();
        if let Some(grad) = &self.gradient {
            for b in 0..n {
                let h = self.steps.step(u[b]);
                x[b] = u[b] + h;
                let gp = grad(&x);
                x[b] = u[b] - h;
                let gm = grad(&x);
                x[b] = u[b];
                for a in 0..n {
                    hess[(a, b)] = (gp[a] - gm[a]) / (2.0 * h);
                }
            }
        } else {
            let f0 = (self.value)(u);
            for a in 0..n {
                let ha = self.steps.step(u[a]);
                x[a] = u[a] + ha;
                let fp = (self.value)(&x);
                x[a] = u[a] - ha;
                let fm = (self.value)(&x);
                x[a] = u[a];
                hess[(a, a)] = (fp - 2.0 * f0 + fm) / (ha * ha);
                for b in 0..a {
                    let hb = self.steps.step(u[b]);
                    let mut corner = |sa: f64, sb: f64| {
                        x[a] = u[a] + sa * ha;
                        x[b] = u[b] + sb * hb;
                        let v = (self.value)(&x);
                        x[a] = u[a];
                        x[b] = u[b];
                        v
                    };
                    let mixed = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                        / (4.0 * ha * hb);
                    hess[(a, b)] = mixed;
                    hess[(b, a)] = mixed;
                }
            }
        }
        Ok(0.5 * (&hess + hess.transpose()))
    }
}

impl MetricField for GeneralPotential {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_at(&self, u: &[f64]) -> Result<HessianMetricPoint> {
        let g = self.hessian(u)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("Hessian has non-finite entries".into()));
        }
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Geometry(format!("Hessian of Psi is not positive definite at {u:?}")))?;
        let sqrt_det = chol.l_dirty().diagonal().iter().product::<f64>().abs();
        let g_inv = chol.inverse();
        Ok(HessianMetricPoint {
            point_u: u.to_vec(),
            components: MetricComponents::Full { g, g_inv },
            sqrt_det,
        })
    }
}

impl HessianPotential for GeneralPotential {
    fn dual_coordinates(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.gradient(u)
    }
}

/// Compare the inverse metric against the Hessian of the Legendre dual
/// `Psi*(V)`, taken as central differences of the dual gradient `V -> U` in
/// the `V` chart. Returns the largest absolute entry of the difference.
///
/// The difference step for component `a` shrinks with the distance of `V_a`
/// to the boundary of the dual domain, where `psi*` loses smoothness.
pub fn dual_metric_check(sp: &SeparablePotential, u: &[f64]) -> Result<f64> {
    let metric = metric_at(sp, u)?;
    let v = sp.to_dual(u)?;
    let n = v.len();
    let (lo, hi) = sp.potential.dual_domain();
    let mut x = v.clone();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let room = (v[a] - lo).min(hi - v[a]);
        let h = 1e-5 * v[a].abs().max(1.0) * room.min(1.0);
        x[a] = v[a] + h;
        let up = sp.from_dual(&x)?;
        x[a] = v[a] - h;
        let um = sp.from_dual(&x)?;
        x[a] = v[a];
        for b in 0..n {
            let hess = (up[b] - um[b]) / (2.0 * h);
            worst = worst.max((metric.g_inv(a, b) - hess).abs());
        }
    }
    Ok(worst)
}

fn finite_or(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} is not finite ({value})")))
    }
}

/// First and second central differences of `f` along axis `a`.
fn axis_derivatives<F>(f: &F, u: &[f64], f0: f64, a: usize, h: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let mut x = u.to_vec();
    x[a] = u[a] + h;
    let fp = finite_or(f(&x)?, "stencil value")?;
    x[a] = u[a] - h;
    let fm = finite_or(f(&x)?, "stencil value")?;
    Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
}

fn gradient_fd<F>(f: &F, u: &[f64], steps: &StepRule) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let mut x = u.to_vec();
    (0..u.len())
        .map(|a| {
            let h = steps.step(u[a]);
            x[a] = u[a] + h;
            let fp = finite_or(f(&x)?, "stencil value")?;
            x[a] = u[a] - h;
            let fm = finite_or(f(&x)?, "stencil value")?;
            x[a] = u[a];
            Ok((fp - fm) / (2.0 * h))
        })
        .collect()
}

/// `(1/sqrt|g|) sum_a d_a (sqrt|g| W^a)` for a vector field `W`, with the
/// outer derivative taken by central differences.
pub fn weighted_divergence<M, W>(metric: &M, field: &W, u: &[f64], steps: &StepRule) -> Result<f64>
where
    M: MetricField + ?Sized,
    W: Fn(&[f64], &HessianMetricPoint) -> Result<Vec<f64>> + ?Sized,
{
    check_dim(metric.dim(), u.len())?;
    check_finite(u, "U")?;
    let center = metric.metric_at(u)?;
    steps.extrapolate(|rule| {
        let mut x = u.to_vec();
        let mut total = 0.0;
        for a in 0..u.len() {
            let h = rule.step(u[a]);
            let mut flux = |offset: f64| -> Result<f64> {
                x[a] = u[a] + offset;
                let m = metric.metric_at(&x)?;
                let w = field(&x, &m)?;
                x[a] = u[a];
                finite_or(m.sqrt_det * w[a], "flux")
            };
            total += (flux(h)? - flux(-h)?) / (2.0 * h);
        }
        finite_or(total / center.sqrt_det, "divergence")
    })
}

/// Laplace-Beltrami operator of `f` at `u`.
///
/// Separable (diagonal) metrics use
/// `sum_a [ f_aa / g_a - (d_a g_a) f_a / (2 g_a^2) ]` with analytic `g_a` and
/// `d_a g_a`; general metrics difference the flux `sqrt|g| g^ab d_b f`.
pub fn laplace_beltrami<M, F>(metric: &M, f: &F, u: &[f64], steps: &StepRule) -> Result<f64>
where
    M: MetricField + ?Sized,
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    check_dim(metric.dim(), u.len())?;
    check_finite(u, "U")?;
    let center = metric.metric_at(u)?;
    match &center.components {
        MetricComponents::Diagonal { g, third, .. } => steps.extrapolate(|rule| {
            let f0 = finite_or(f(u)?, "f")?;
            let mut total = 0.0;
            for a in 0..u.len() {
                let (fa, faa) = axis_derivatives(f, u, f0, a, rule.step(u[a]))?;
                total += faa / g[a] - third[a] * fa / (2.0 * g[a] * g[a]);
            }
            finite_or(total, "Laplacian")
        }),
        MetricComponents::Full { .. } => {
            let raised_gradient =
                |x: &[f64], m: &HessianMetricPoint| -> Result<Vec<f64>> { Ok(m.raise(&gradient_fd(f, x, steps)?)) };
            weighted_divergence(metric, &raised_gradient, u, steps)
        }
    }
}

/// Co-derivative of a one-form field: `(1/sqrt|g|) sum_a d_a(sqrt|g| g^ab omega_b)`.
///
/// The sign is chosen so that applied to `-dH` it returns the compressibility
/// of the flow generated by `H`.
pub fn coderivative_of<M, W>(one_form: &W, metric: &M, u: &[f64], steps: &StepRule) -> Result<f64>
where
    M: MetricField + ?Sized,
    W: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let raised = |x: &[f64], m: &HessianMetricPoint| -> Result<Vec<f64>> {
        let omega = one_form(x)?;
        check_finite(&omega, "one-form")?;
        Ok(m.raise(&omega))
    };
    weighted_divergence(metric, &raised, u, steps)
}

/// Largest antisymmetric part `|d_a omega_b - d_b omega_a|` over `a < b`,
/// i.e. the size of the exterior derivative of a one-form field.
pub fn exterior_derivative_residual<W>(one_form: &W, u: &[f64], steps: &StepRule) -> Result<f64>
where
    W: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    check_finite(u, "U")?;
    let n = u.len();
    // jac[a][b] = d_a omega_b
    let mut jac = vec![vec![0.0; n]; n];
    let mut x = u.to_vec();
    for a in 0..n {
        let h = steps.step(u[a]);
        x[a] = u[a] + h;
        let wp = one_form(&x)?;
        x[a] = u[a] - h;
        let wm = one_form(&x)?;
        x[a] = u[a];
        check_dim(n, wp.len())?;
        for b in 0..n {
            jac[a][b] = (wp[b] - wm[b]) / (2.0 * h);
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            worst = worst.max((jac[a][b] - jac[b][a]).abs());
        }
    }
    finite_or(worst, "closedness residual")
}

/// Metric dual of the flow generated by `energy`, as a one-form field in the
/// `U` chart: `omega_b = g_ab Xdot^a = -dH/dU^b`.
pub fn flow_one_form<'a>(
    energy: &'a EnergyFunction,
    sp: &'a SeparablePotential,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a {
    move |x: &[f64]| {
        let chart = sp.chart(x)?;
        let grad = energy.grad(&chart.u, &chart.v)?;
        Ok(grad.iter().zip(&chart.d2).map(|(dh, g)| -dh * g).collect())
    }
}

/// Closedness residual of the metric-dual one-form of the flow of `energy`.
/// Compare against `1e-5 * max(1, |omega|)`.
pub fn one_form_closedness(energy: &EnergyFunction, sp: &SeparablePotential, u: &[f64]) -> Result<f64> {
    exterior_derivative_residual(&flow_one_form(energy, sp), u, &StepRule::default())
}
