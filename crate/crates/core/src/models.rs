//! Generalized Hopfield systems `dU^a/dt = -dH/dV_a` and the restricted
//! Cohen-Grossberg class.
//!
//! An [`EnergyFunction`] is written in the dual chart `V = dPsi/dU`. The
//! network energy needs the primal coordinate as well (its integral term is
//! the Legendre dual of the activation potential), so evaluation takes both
//! charts of the same point.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::HessianPotential;
use crate::potentials::{ConvexPotential, ScalarFn, SeparablePotential};

/// Field norm below which a state counts as steady.
pub const STEADY_TOL: f64 = 1e-10;

/// Largest tolerated `|J_ab - J_ba|`.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn is_steady(xdot: &[f64]) -> bool {
    xdot.iter().all(|x| x.abs() < STEADY_TOL)
}

/// Couplings, resistances and external currents of a Hopfield network.
/// All capacitances are one.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    n: usize,
    /// Row-major `n x n`.
    j: Vec<f64>,
    r: Vec<f64>,
    i_ext: Vec<f64>,
}

impl NetworkSpec {
    /// Validates shapes, positivity of `R` and symmetry of `J`.
    pub fn new(j: Vec<f64>, r: Vec<f64>, i_ext: Vec<f64>) -> Result<Self> {
        let spec = Self::new_unchecked(j, r, i_ext)?;
        let n = spec.n;
        for a in 0..n {
            for b in a + 1..n {
                let gap = (spec.coupling(a, b) - spec.coupling(b, a)).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::Model(format!(
                        "coupling matrix J is not symmetric: J[{a}][{b}] = {} but J[{b}][{a}] = {}",
                        spec.coupling(a, b),
                        spec.coupling(b, a)
                    )));
                }
            }
        }
        Ok(spec)
    }

    /// Like [`new`](Self::new) but accepts an asymmetric `J`. The resulting
    /// field is no longer a gradient flow; this exists for negative controls.
    pub fn new_unchecked(j: Vec<f64>, r: Vec<f64>, i_ext: Vec<f64>) -> Result<Self> {
        let n = r.len();
        if n == 0 {
            return Err(Error::Model("network must have at least one unit".into()));
        }
        if j.len() != n * n {
            return Err(Error::Model(format!(
                "J must have n^2 = {} entries, got {}",
                n * n,
                j.len()
            )));
        }
        check_dim(n, i_ext.len())?;
        check_finite(&j, "J")?;
        check_finite(&i_ext, "I_ext")?;
        if let Some(a) = r.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::Model(format!("resistance R[{a}] = {} must be positive", r[a])));
        }
        Ok(Self { n, j, r, i_ext })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.j[a * self.n + b]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.j
    }

    pub fn resistances(&self) -> &[f64] {
        &self.r
    }

    pub fn currents(&self) -> &[f64] {
        &self.i_ext
    }

    /// `sum_b J_ab V_b - U^a / R_a + I^a`, the textbook right-hand side.
    pub fn drive(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|a| {
                let jv: f64 = (0..self.n).map(|b| self.coupling(a, b) * v[b]).sum();
                jv - u[a] / self.r[a] + self.i_ext[a]
            })
            .collect()
    }
}

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Energy given directly as a function of `V`. A missing Hessian diagonal is
/// taken by central differences of the gradient.
#[derive(Clone)]
pub struct CustomEnergy {
    pub value: ValueFn,
    pub grad: VectorFn,
    pub hess_diag: Option<VectorFn>,
}

impl fmt::Debug for CustomEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomEnergy")
            .field("analytic_hess_diag", &self.hess_diag.is_some())
            .finish()
    }
}

/// Lyapunov function `H(V)` of a generalized Hopfield system.
#[derive(Debug, Clone)]
pub enum EnergyFunction {
    /// `H = sum_a V_a^2 / 2`; the flow is the gradient system `dU/dt = -dPsi/dU`.
    QuadraticIdentity,
    /// Network energy with activation `psi'`.
    Hopfield {
        spec: NetworkSpec,
        potential: ConvexPotential,
    },
    Custom(CustomEnergy),
}

impl EnergyFunction {
    pub fn hopfield(spec: NetworkSpec, potential: ConvexPotential) -> Self {
        EnergyFunction::Hopfield { spec, potential }
    }

    pub fn custom(energy: CustomEnergy) -> Self {
        EnergyFunction::Custom(energy)
    }

    /// Dimension fixed by the energy, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            EnergyFunction::Hopfield { spec, .. } => Some(spec.dim()),
            _ => None,
        }
    }

    fn check_point(&self, u: &[f64], v: &[f64]) -> Result<()> {
        check_dim(u.len(), v.len())?;
        if let Some(n) = self.dim() {
            check_dim(n, v.len())?;
        }
        check_finite(v, "V")
    }

    /// `H` at the point with primal coordinates `u` and dual coordinates `v`.
    pub fn value(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_point(u, v)?;
        match self {
            EnergyFunction::QuadraticIdentity => Ok(0.5 * v.iter().map(|x| x * x).sum::<f64>()),
            EnergyFunction::Hopfield { spec, potential } => {
                let mut total = 0.0;
                for a in 0..spec.n {
                    let jv: f64 = (0..spec.n).map(|b| spec.coupling(a, b) * v[b]).sum();
                    let integral = activation_integral(potential, u[a], v[a])?;
                    total += 0.5 * v[a] * jv - integral / spec.r[a] + v[a] * spec.i_ext[a];
                }
                Ok(-total)
            }
            EnergyFunction::Custom(c) => Ok((c.value)(v)),
        }
    }

    /// `H(V)` when only the dual coordinates are known.
    pub fn value_dual(&self, v: &[f64]) -> Result<f64> {
        match self {
            EnergyFunction::Hopfield { potential, .. } => {
                let sp = SeparablePotential::new(potential.clone(), v.len())?;
                let u = sp.from_dual(v)?;
                self.value(&u, v)
            }
            _ => self.value(v, v),
        }
    }

    /// `dH/dV_a`.
    pub fn grad(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u, v)?;
        match self {
            EnergyFunction::QuadraticIdentity => Ok(v.to_vec()),
            EnergyFunction::Hopfield { spec, .. } => Ok(spec.drive(u, v).into_iter().map(|d| -d).collect()),
            EnergyFunction::Custom(c) => {
                let g = (c.grad)(v);
                check_dim(v.len(), g.len())?;
                Ok(g)
            }
        }
    }

    /// `d^2 H / dV_a^2`.
    pub fn hess_diag(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u, v)?;
        match self {
            EnergyFunction::QuadraticIdentity => Ok(vec![1.0; v.len()]),
            EnergyFunction::Hopfield { spec, potential } => (0..spec.n)
                .map(|a| {
                    let g = potential.d2(u[a]);
                    if !(g > 0.0) {
                        return Err(Error::Geometry(format!("psi''(U^{a}) = {g}")));
                    }
                    Ok(-spec.coupling(a, a) + 1.0 / (spec.r[a] * g))
                })
                .collect(),
            EnergyFunction::Custom(c) => match &c.hess_diag {
                Some(h) => Ok(h(v)),
                None => {
                    let mut x = v.to_vec();
                    (0..v.len())
                        .map(|a| {
                            let h = 1e-4 * v[a].abs().max(1.0);
                            x[a] = v[a] + h;
                            let gp = (c.grad)(&x)[a];
                            x[a] = v[a] - h;
                            let gm = (c.grad)(&x)[a];
                            x[a] = v[a];
                            Ok((gp - gm) / (2.0 * h))
                        })
                        .collect()
                }
            },
        }
    }

    /// Full Hessian `d^2 H / dV_a dV_b`.
    pub fn hessian(&self, u: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
        let n = v.len();
        match self {
            EnergyFunction::Custom(c) => {
                self.check_point(u, v)?;
                let mut m = DMatrix::zeros(n, n);
                let mut x = v.to_vec();
                for b in 0..n {
                    let h = 1e-4 * v[b].abs().max(1.0);
                    x[b] = v[b] + h;
                    let gp = (c.grad)(&x);
                    x[b] = v[b] - h;
                    let gm = (c.grad)(&x);
                    x[b] = v[b];
                    for a in 0..n {
                        m[(a, b)] = (gp[a] - gm[a]) / (2.0 * h);
                    }
                }
                Ok(0.5 * (&m + m.transpose()))
            }
            EnergyFunction::Hopfield { spec, .. } => {
                let diag = self.hess_diag(u, v)?;
                let mut m = DMatrix::from_row_slice(n, n, &spec.j).map(|x| -x);
                for a in 0..n {
                    m[(a, a)] = diag[a];
                }
                Ok(m)
            }
            EnergyFunction::QuadraticIdentity => {
                self.check_point(u, v)?;
                Ok(DMatrix::identity(n, n))
            }
        }
    }
}

/// `int_0^{v} (psi')^{-1}`, using the Fenchel identity wherever the lower
/// limit lies inside the dual domain.
fn activation_integral(potential: &ConvexPotential, u: f64, v: f64) -> Result<f64> {
    match potential {
        // psi*(0) = 0 for both closed forms, and psi*(v) = u v - psi(u).
        ConvexPotential::Softplus | ConvexPotential::Quadratic { .. } => Ok(u * v - potential.value(u)),
        ConvexPotential::Custom(_) => {
            if potential.in_dual_domain(0.0) {
                let rest = potential.inverse_d1(0.0)?;
                Ok((u * v - potential.value(u)) + potential.value(rest))
            } else {
                potential.inverse_activation_integral(v)
            }
        }
    }
}

/// Network energy at `V`.
pub fn hopfield_energy_value(spec: &NetworkSpec, p: &ConvexPotential, v: &[f64]) -> Result<f64> {
    EnergyFunction::hopfield(spec.clone(), p.clone()).value_dual(v)
}

/// `dU^a/dt = -dH/dV_a` at `u`.
pub fn vector_field(energy: &EnergyFunction, sp: &SeparablePotential, u: &[f64]) -> Result<Vec<f64>> {
    let v = sp.to_dual(u)?;
    Ok(energy.grad(u, &v)?.into_iter().map(|g| -g).collect())
}

/// Same flow over any Hessian potential.
pub fn vector_field_general<P>(energy: &EnergyFunction, potential: &P, u: &[f64]) -> Result<Vec<f64>>
where
    P: HessianPotential + ?Sized,
{
    let v = potential.dual_coordinates(u)?;
    Ok(energy.grad(u, &v)?.into_iter().map(|g| -g).collect())
}

/// Rate of change of `H` along the flow computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRate {
    /// Chain rule `sum_a (dH/dV_a)(dV_a/dt)`.
    pub dh_dt: f64,
    /// `-g(X, X)`.
    pub minus_g_xx: f64,
}

pub fn lyapunov_rate(energy: &EnergyFunction, sp: &SeparablePotential, u: &[f64]) -> Result<LyapunovRate> {
    let chart = sp.chart(u)?;
    let grad = energy.grad(u, &chart.v)?;
    let xdot: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut dh_dt = 0.0;
    let mut g_xx = 0.0;
    for a in 0..u.len() {
        let v_dot = chart.d2[a] * xdot[a];
        dh_dt += grad[a] * v_dot;
        g_xx += chart.d2[a] * xdot[a] * xdot[a];
    }
    Ok(LyapunovRate {
        dh_dt,
        minus_g_xx: -g_xx,
    })
}

/// Largest `|sum_b g_ab Xdot^b + dH/dU^a|`, with `dH/dU^a` by the chain rule.
pub fn metric_pairing_residual(energy: &EnergyFunction, sp: &SeparablePotential, u: &[f64]) -> Result<f64> {
    let chart = sp.chart(u)?;
    let grad = energy.grad(u, &chart.v)?;
    Ok((0..u.len())
        .map(|a| {
            let lowered = chart.d2[a] * -grad[a];
            let dh_du = chart.d2[a] * grad[a];
            (lowered + dh_du).abs()
        })
        .fold(0.0, f64::max))
}

/// Per-coordinate function used for the Cohen-Grossberg amplification and
/// self-signal terms.
#[derive(Clone)]
pub enum CoordinateFn {
    /// `c0 + c1 x + c2 x^2 + ...`
    Polynomial(Vec<f64>),
    Custom(ScalarFn),
}

impl fmt::Debug for CoordinateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordinateFn::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            CoordinateFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CoordinateFn {
    pub fn constant(c: f64) -> Self {
        CoordinateFn::Polynomial(vec![c])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CoordinateFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * x + k),
            CoordinateFn::Custom(f) => f(x),
        }
    }
}

/// `dU^a/dt = (B^a(U^a) - sum_j C^{aj} psi'(U^j)) A^a(U^a)`.
#[derive(Debug, Clone)]
pub struct CohenGrossbergSpec {
    n: usize,
    a: Vec<CoordinateFn>,
    b: Vec<CoordinateFn>,
    /// Row-major `n x n`, symmetric.
    c: Vec<f64>,
    psi: ConvexPotential,
}

impl CohenGrossbergSpec {
    pub fn new(a: Vec<CoordinateFn>, b: Vec<CoordinateFn>, c: Vec<f64>, psi: ConvexPotential) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Model("Cohen-Grossberg system needs at least one unit".into()));
        }
        check_dim(n, b.len())?;
        if c.len() != n * n {
            return Err(Error::Model(format!(
                "C must have n^2 = {} entries, got {}",
                n * n,
                c.len()
            )));
        }
        check_finite(&c, "C")?;
        for i in 0..n {
            for k in i + 1..n {
                if (c[i * n + k] - c[k * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::Model(format!(
                        "matrix C is not symmetric: C[{i}][{k}] = {} but C[{k}][{i}] = {}",
                        c[i * n + k],
                        c[k * n + i]
                    )));
                }
            }
        }
        Ok(Self { n, a, b, c, psi })
    }

    /// The network as a Cohen-Grossberg system: `A = 1`, `B = -U/R + I`, `C = -J`.
    pub fn from_network(spec: &NetworkSpec, psi: ConvexPotential) -> Result<Self> {
        let n = spec.dim();
        let a = vec![CoordinateFn::constant(1.0); n];
        let b = (0..n)
            .map(|k| CoordinateFn::Polynomial(vec![spec.currents()[k], -1.0 / spec.resistances()[k]]))
            .collect();
        let c = spec.couplings().iter().map(|x| -x).collect();
        Self::new(a, b, c, psi)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &ConvexPotential {
        &self.psi
    }

    fn coupling(&self, i: usize, k: usize) -> f64 {
        self.c[i * self.n + k]
    }

    fn amplification(&self, u: &[f64]) -> Result<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let a = self.a[i].eval(u[i]);
                if a.is_finite() && a > 0.0 {
                    Ok(a)
                } else {
                    Err(Error::Model(format!("amplification A^{i}(U) = {a} must be positive")))
                }
            })
            .collect()
    }

    /// `-B^a + sum_k C^{ak} psi'(U^k)`, which equals `dH'/dV_a`.
    fn dual_gradient(&self, u: &[f64]) -> Vec<f64> {
        let act: Vec<f64> = u.iter().map(|&x| self.psi.d1(x)).collect();
        (0..self.n)
            .map(|i| {
                let cv: f64 = (0..self.n).map(|k| self.coupling(i, k) * act[k]).sum();
                -self.b[i].eval(u[i]) + cv
            })
            .collect()
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        check_dim(self.n, u.len())?;
        check_finite(u, "U")
    }
}

/// Right-hand side of the Cohen-Grossberg system.
pub fn cohen_grossberg_field(spec: &CohenGrossbergSpec, u: &[f64]) -> Result<Vec<f64>> {
    spec.check_input(u)?;
    let amp = spec.amplification(u)?;
    let act: Vec<f64> = u.iter().map(|&x| spec.psi.d1(x)).collect();
    Ok((0..spec.n)
        .map(|i| {
            let cv: f64 = (0..spec.n).map(|k| spec.coupling(i, k) * act[k]).sum();
            (spec.b[i].eval(u[i]) - cv) * amp[i]
        })
        .collect())
}

/// The same field written as `-A^a dH'/dV_a`.
pub fn cohen_grossberg_reduced_field(spec: &CohenGrossbergSpec, u: &[f64]) -> Result<Vec<f64>> {
    spec.check_input(u)?;
    let amp = spec.amplification(u)?;
    let chart_d2: Vec<f64> = u.iter().map(|&x| spec.psi.d2(x)).collect();
    let dh_du = cohen_grossberg_lyapunov_gradient(spec, u)?;
    Ok((0..spec.n).map(|i| -amp[i] * dh_du[i] / chart_d2[i]).collect())
}

/// `dH'/dU^j = (-B^j + sum_k C^{jk} psi'(U^k)) psi''(U^j)`.
pub fn cohen_grossberg_lyapunov_gradient(spec: &CohenGrossbergSpec, u: &[f64]) -> Result<Vec<f64>> {
    spec.check_input(u)?;
    Ok(spec
        .dual_gradient(u)
        .into_iter()
        .zip(u)
        .map(|(d, &x)| d * spec.psi.d2(x))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohenGrossbergLyapunov {
    pub h_prime: f64,
    pub dh_prime_dt: f64,
}

/// `H'(U) = -sum_j int_0^{U^j} B^j psi'' + (1/2) sum_jk C^{jk} psi'_j psi'_k` and
/// `dH'/dt = -sum_j psi''(U^j) (dU^j/dt)^2 / A^j`.
pub fn cohen_grossberg_lyapunov(spec: &CohenGrossbergSpec, u: &[f64]) -> Result<CohenGrossbergLyapunov> {
    let h_prime = cohen_grossberg_h_prime(spec, u)?;
    let xdot = cohen_grossberg_field(spec, u)?;
    let amp = spec.amplification(u)?;
    let dh_prime_dt = -(0..spec.n)
        .map(|j| spec.psi.d2(u[j]) * xdot[j] * xdot[j] / amp[j])
        .sum::<f64>();
    Ok(CohenGrossbergLyapunov { h_prime, dh_prime_dt })
}

/// `H'` alone; the integrals start at zero.
pub fn cohen_grossberg_h_prime(spec: &CohenGrossbergSpec, u: &[f64]) -> Result<f64> {
    spec.check_input(u)?;
    let mut h = 0.0;
    for j in 0..spec.n {
        let b = &spec.b[j];
        h -= crate::quad::integrate(|xi| Ok(b.eval(xi) * spec.psi.d2(xi)), 0.0, u[j], 1e-14)?;
    }
    let act: Vec<f64> = u.iter().map(|&x| spec.psi.d1(x)).collect();
    for j in 0..spec.n {
        for k in 0..spec.n {
            h += 0.5 * spec.coupling(j, k) * act[j] * act[k];
        }
    }
    Ok(h)
}
