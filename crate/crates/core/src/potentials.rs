//! Strictly convex scalar potentials, their Legendre duals, and the
//! primal/dual coordinate maps they induce.
//!
//! A [`ConvexPotential`] is a one-variable function `psi` with `psi'' > 0`.
//! Its derivative `psi'` is the activation function sending an internal
//! state `x` to the output `x* = psi'(x)`, and its convex conjugate
//! `psi*(x*) = x x* - psi(x)` generates the inverse map. A
//! [`SeparablePotential`] sums one such potential over `n` coordinates.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_finite, Error, Result};

/// Real function of one variable shared across threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Overflow guard for the softplus evaluation.
const SOFTPLUS_LARGE: f64 = 35.0;

/// Iteration cap for inverting a custom activation.
pub const NEWTON_MAX_ITER: usize = 200;

/// `psi` and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeChain {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Result of inverting `psi'`: the primal point and the dual potential there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendrePair {
    pub x: f64,
    pub psi_star: f64,
}

/// User-supplied potential. `d3` may be omitted; it is then estimated by
/// central differences of `d2`.
#[derive(Clone)]
pub struct CustomPotential {
    pub value: ScalarFn,
    pub d1: ScalarFn,
    pub d2: ScalarFn,
    pub d3: Option<ScalarFn>,
    /// Open interval of admissible `x`.
    pub domain: (f64, f64),
    /// Open interval of admissible `x* = psi'(x)`.
    pub dual_domain: (f64, f64),
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("domain", &self.domain)
            .field("dual_domain", &self.dual_domain)
            .field("analytic_d3", &self.d3.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Softplus,
    Quadratic { coefficient: f64 },
    Custom,
}

/// A strictly convex potential of one variable.
#[derive(Debug, Clone)]
pub enum ConvexPotential {
    /// `ln(1 + e^x)`; activation is the logistic sigmoid.
    Softplus,
    /// `c x^2 / 2` with `c > 0`; activation is linear.
    Quadratic {
        coefficient: f64,
    },
    Custom(Arc<CustomPotential>),
}

impl ConvexPotential {
    pub fn softplus() -> Self {
        ConvexPotential::Softplus
    }

    pub fn quadratic(coefficient: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(Error::Domain(format!(
                "quadratic coefficient must be positive and finite, got {coefficient}"
            )));
        }
        Ok(ConvexPotential::Quadratic { coefficient })
    }

    pub fn custom(custom: CustomPotential) -> Result<Self> {
        let (lo, hi) = custom.domain;
        let (dlo, dhi) = custom.dual_domain;
        if !(lo < hi) || !(dlo < dhi) {
            return Err(Error::Domain(format!(
                "custom potential needs non-empty open intervals, got domain ({lo}, {hi}) and dual domain ({dlo}, {dhi})"
            )));
        }
        Ok(ConvexPotential::Custom(Arc::new(custom)))
    }

    pub fn kind(&self) -> PotentialKind {
        match self {
            ConvexPotential::Softplus => PotentialKind::Softplus,
            ConvexPotential::Quadratic { coefficient } => PotentialKind::Quadratic {
                coefficient: *coefficient,
            },
            ConvexPotential::Custom(_) => PotentialKind::Custom,
        }
    }

    /// Open interval of admissible primal `x`.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ConvexPotential::Custom(c) => c.domain,
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Open interval of admissible dual `x*`.
    pub fn dual_domain(&self) -> (f64, f64) {
        match self {
            ConvexPotential::Softplus => (0.0, 1.0),
            ConvexPotential::Quadratic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ConvexPotential::Custom(c) => c.dual_domain,
        }
    }

    pub fn in_dual_domain(&self, y: f64) -> bool {
        let (lo, hi) = self.dual_domain();
        y.is_finite() && lo < y && y < hi
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ConvexPotential::Softplus => softplus(x),
            ConvexPotential::Quadratic { coefficient } => 0.5 * coefficient * x * x,
            ConvexPotential::Custom(c) => (c.value)(x),
        }
    }

    /// Activation `psi'(x)`.
    pub fn d1(&self, x: f64) -> f64 {
        match self {
            ConvexPotential::Softplus => sigmoid(x),
            ConvexPotential::Quadratic { coefficient } => coefficient * x,
            ConvexPotential::Custom(c) => (c.d1)(x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            ConvexPotential::Softplus => sigmoid(x) * sigmoid(-x),
            ConvexPotential::Quadratic { coefficient } => *coefficient,
            ConvexPotential::Custom(c) => (c.d2)(x),
        }
    }

    pub fn d3(&self, x: f64) -> f64 {
        match self {
            ConvexPotential::Softplus => {
                let (s, sm) = (sigmoid(x), sigmoid(-x));
                s * sm * (sm - s)
            }
            ConvexPotential::Quadratic { .. } => 0.0,
            ConvexPotential::Custom(c) => match &c.d3 {
                Some(d3) => d3(x),
                None => {
                    let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
                    ((c.d2)(x + h) - (c.d2)(x - h)) / (2.0 * h)
                }
            },
        }
    }

    /// Value and first three derivatives at `x`.
    pub fn chain(&self, x: f64) -> Result<DerivativeChain> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("potential evaluated at non-finite x = {x}")));
        }
        let (lo, hi) = self.domain();
        if !(lo < x && x < hi) {
            return Err(Error::Domain(format!(
                "x = {x} is outside the potential's domain ({lo}, {hi})"
            )));
        }
        Ok(DerivativeChain {
            value: self.value(x),
            d1: self.d1(x),
            d2: self.d2(x),
            d3: self.d3(x),
        })
    }

    /// Convex conjugate `psi*(y)` for `y` strictly inside the dual domain.
    pub fn dual_value(&self, y: f64) -> Result<f64> {
        legendre_dual(self, y).map(|pair| pair.psi_star)
    }

    /// Inverse activation `(psi')^{-1}(y)`.
    pub fn inverse_d1(&self, y: f64) -> Result<f64> {
        legendre_dual(self, y).map(|pair| pair.x)
    }

    /// `int_0^y (psi')^{-1}(v) dv`, the integral term of the Hopfield energy.
    ///
    /// For the closed-form potentials this is `psi*(y) - psi*(0)` with
    /// `psi*(0) = 0`. Custom potentials are integrated numerically, which
    /// requires `0` to lie in the closure of the dual domain.
    pub fn inverse_activation_integral(&self, y: f64) -> Result<f64> {
        match self {
            ConvexPotential::Softplus | ConvexPotential::Quadratic { .. } => self.dual_value(y),
            ConvexPotential::Custom(c) => {
                if !self.in_dual_domain(y) {
                    return Err(self.dual_domain_error(0, y));
                }
                let (dlo, dhi) = c.dual_domain;
                if !(dlo <= 0.0 && 0.0 <= dhi) {
                    return Err(Error::Domain(format!(
                        "integral lower limit 0 is outside the dual domain ({dlo}, {dhi})"
                    )));
                }
                crate::quad::integrate(|v| self.inverse_d1(v), 0.0, y, 1e-12)
            }
        }
    }

    pub(crate) fn dual_domain_error(&self, index: usize, value: f64) -> Error {
        let (lo, hi) = self.dual_domain();
        Error::DualDomain { index, value, lo, hi }
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LARGE {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid evaluated on the branch that never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softplus together with `sigma`, `sigma (1 - sigma)` and
/// `sigma (1 - sigma)(1 - 2 sigma)`.
pub fn softplus_chain(x: f64) -> Result<DerivativeChain> {
    ConvexPotential::Softplus.chain(x)
}

/// Invert the activation of `p` at `x_star` and evaluate the dual potential.
pub fn legendre_dual(p: &ConvexPotential, x_star: f64) -> Result<LegendrePair> {
    if !p.in_dual_domain(x_star) {
        return Err(p.dual_domain_error(0, x_star));
    }
    match p {
        ConvexPotential::Softplus => {
            let one_minus = 1.0 - x_star;
            let x = x_star.ln() - (-x_star).ln_1p();
            let psi_star = x_star * x_star.ln() + one_minus * (-x_star).ln_1p();
            Ok(LegendrePair { x, psi_star })
        }
        ConvexPotential::Quadratic { coefficient } => Ok(LegendrePair {
            x: x_star / coefficient,
            psi_star: x_star * x_star / (2.0 * coefficient),
        }),
        ConvexPotential::Custom(c) => {
            let x = invert_monotone(c, x_star)?;
            Ok(LegendrePair {
                x,
                psi_star: x * x_star - (c.value)(x),
            })
        }
    }
}

/// Solve `psi'(x) = target` by Newton steps kept inside a shrinking bracket.
fn invert_monotone(c: &CustomPotential, target: f64) -> Result<f64> {
    let (lo_dom, hi_dom) = c.domain;
    let residual = |x: f64| (c.d1)(x) - target;
    let tol = 1e-12 * target.abs().max(1.0);

    let mut x = if lo_dom < 0.0 && 0.0 < hi_dom {
        0.0
    } else if lo_dom.is_finite() && hi_dom.is_finite() {
        0.5 * (lo_dom + hi_dom)
    } else if lo_dom.is_finite() {
        lo_dom + 1.0
    } else {
        hi_dom - 1.0
    };

    // psi' is increasing, so the sign of the residual tells which way to walk.
    let mut iterations = 0;
    let r0 = residual(x);
    if r0.abs() <= tol {
        return Ok(x);
    }
    let (mut lo, mut hi);
    let mut step = 1.0_f64;
    if r0 < 0.0 {
        lo = x;
        loop {
            iterations += 1;
            let mut cand = lo + step;
            if cand >= hi_dom {
                cand = 0.5 * (lo + hi_dom);
            }
            if residual(cand) >= 0.0 {
                hi = cand;
                break;
            }
            lo = cand;
            step *= 2.0;
            if iterations >= NEWTON_MAX_ITER {
                return Err(Error::Convergence {
                    iterations,
                    residual: residual(lo).abs(),
                });
            }
        }
    } else {
        hi = x;
        loop {
            iterations += 1;
            let mut cand = hi - step;
            if cand <= lo_dom {
                cand = 0.5 * (hi + lo_dom);
            }
            if residual(cand) <= 0.0 {
                lo = cand;
                break;
            }
            hi = cand;
            step *= 2.0;
            if iterations >= NEWTON_MAX_ITER {
                return Err(Error::Convergence {
                    iterations,
                    residual: residual(hi).abs(),
                });
            }
        }
    }

    x = 0.5 * (lo + hi);
    while iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let r = residual(x);
        if r.abs() <= tol {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = (c.d2)(x);
        let newton = x - r / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            let r = residual(x);
            if r.abs() <= tol {
                return Ok(x);
            }
            return Err(Error::Convergence {
                iterations,
                residual: r.abs(),
            });
        }
    }
    Err(Error::Convergence {
        iterations,
        residual: residual(x).abs(),
    })
}

/// Coordinates of a point in both charts plus the metric data `psi''`, `psi'''`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl ChartPoint {
    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// `Psi(U) = sum_a psi(U^a)` on `n` coordinates.
#[derive(Debug, Clone)]
pub struct SeparablePotential {
    pub potential: ConvexPotential,
    n: usize,
}

impl SeparablePotential {
    pub fn new(potential: ConvexPotential, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(Self { potential, n })
    }

    pub fn softplus(n: usize) -> Result<Self> {
        Self::new(ConvexPotential::Softplus, n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        self.check_input(u)?;
        Ok(u.iter().map(|&x| self.potential.value(x)).sum())
    }

    /// `V_a = psi'(U^a)`.
    pub fn to_dual(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_input(u)?;
        Ok(u.iter().map(|&x| self.potential.d1(x)).collect())
    }

    /// Inverse of [`to_dual`](Self::to_dual), componentwise.
    pub fn from_dual(&self, v: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.n, v.len())?;
        v.iter()
            .enumerate()
            .map(|(i, &y)| {
                legendre_dual(&self.potential, y).map(|p| p.x).map_err(|e| match e {
                    Error::DualDomain { value, lo, hi, .. } => Error::DualDomain {
                        index: i,
                        value,
                        lo,
                        hi,
                    },
                    other => other,
                })
            })
            .collect()
    }

    /// Total Legendre transform `Psi*(V) = sum_a psi*(V_a)`.
    pub fn dual_value(&self, v: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.n, v.len())?;
        let mut total = 0.0;
        for (i, &y) in v.iter().enumerate() {
            if !self.potential.in_dual_domain(y) {
                return Err(self.potential.dual_domain_error(i, y));
            }
            total += self.potential.dual_value(y)?;
        }
        Ok(total)
    }

    pub fn chart(&self, u: &[f64]) -> Result<ChartPoint> {
        self.check_input(u)?;
        let mut point = ChartPoint {
            u: u.to_vec(),
            v: Vec::with_capacity(self.n),
            d2: Vec::with_capacity(self.n),
            d3: Vec::with_capacity(self.n),
        };
        for &x in u {
            let c = self.potential.chain(x)?;
            point.v.push(c.d1);
            point.d2.push(c.d2);
            point.d3.push(c.d3);
        }
        Ok(point)
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        crate::error::check_dim(self.n, u.len())?;
        check_finite(u, "U")
    }
}
