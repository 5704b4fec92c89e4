//! Seeded property suites. Every check reports the measured residual next
//! to its tolerance so the table can be read without the source.

use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::compressibility::{
    kappa_closed_form, kappa_divergence_oracle, kappa_laplacian, kappa_report, volume_contraction_run,
    GeneralizedHopfield, LinearField, PlanarHamiltonian,
};
use crate::dynamics::{find_steady_state, integrate, lyapunov_audit, IntegratorConfig};
use crate::error::{Error, Result};
use crate::geometry::{coderivative_of, dual_metric_check, flow_one_form, metric_at, one_form_closedness, StepRule};
use crate::models::{
    cohen_grossberg_field, cohen_grossberg_h_prime, cohen_grossberg_lyapunov, lyapunov_rate, metric_pairing_residual,
    vector_field, CohenGrossbergSpec, CoordinateFn, EnergyFunction, NetworkSpec,
};
use crate::potentials::{legendre_dual, ConvexPotential, SeparablePotential};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Legendre,
    Geometry,
    Lyapunov,
    Kappa,
    Volume,
    CohenGrossberg,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = [
        "legendre",
        "geometry",
        "lyapunov",
        "kappa",
        "volume",
        "cohen-grossberg",
        "all",
    ];

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Legendre,
                Suite::Geometry,
                Suite::Lyapunov,
                Suite::Kappa,
                Suite::Volume,
                Suite::CohenGrossberg,
            ],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "legendre" => Suite::Legendre,
            "geometry" => Suite::Geometry,
            "lyapunov" => Suite::Lyapunov,
            "kappa" => Suite::Kappa,
            "volume" => Suite::Volume,
            "cohen-grossberg" => Suite::CohenGrossberg,
            "all" => Suite::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite `{other}` (expected one of {})",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::Legendre,
            Suite::Geometry,
            Suite::Lyapunov,
            Suite::Kappa,
            Suite::Volume,
            Suite::CohenGrossberg,
            Suite::All,
        ]
        .iter()
        .position(|s| s == self)
        .unwrap();
        f.write_str(Suite::NAMES[i])
    }
}

/// One row of a verification table. `measured <= tolerance` passes unless the
/// check is strict, in which case `measured < tolerance` is required.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn at_most(suite: Suite, name: &str, measured: Result<f64>, tolerance: f64) -> Self {
        Self::build(suite, name, measured, tolerance, |m| m <= tolerance)
    }

    fn below(suite: Suite, name: &str, measured: Result<f64>, tolerance: f64) -> Self {
        Self::build(suite, name, measured, tolerance, |m| m < tolerance)
    }

    fn build(suite: Suite, name: &str, measured: Result<f64>, tolerance: f64, ok: impl Fn(f64) -> bool) -> Self {
        let (measured, error) = match measured {
            Ok(m) => (m, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        Check {
            suite: suite.to_string(),
            name: name.to_string(),
            measured,
            tolerance,
            passed: error.is_none() && ok(measured),
            error,
        }
    }
}

/// Run a suite with the given base seed.
pub fn run(suite: Suite, seed: u64) -> Vec<Check> {
    suite
        .parts()
        .into_iter()
        .flat_map(|s| match s {
            Suite::Legendre => legendre(seed),
            Suite::Geometry => geometry(seed),
            Suite::Lyapunov => lyapunov(seed),
            Suite::Kappa => kappa(seed),
            Suite::Volume => volume(),
            Suite::CohenGrossberg => cohen_grossberg(seed),
            Suite::All => unreachable!(),
        })
        .collect()
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Fixed-width text table, one line per check.
pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut out = format!(
        "{:<6} {:<16} {:<width$} {:>12} {:>10}\n",
        "status", "suite", "check", "measured", "tolerance"
    );
    for c in checks {
        out.push_str(&format!(
            "{:<6} {:<16} {:<width$} {:>12.3e} {:>10.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.measured,
            c.tolerance,
        ));
        if let Some(e) = &c.error {
            out.push_str(&format!("  ({e})"));
        }
        out.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    out.push_str(&format!("{} checks, {} failed\n", checks.len(), failed));
    out
}

/// Independent generator per draw so parallel runs are reproducible.
fn draw_rng(seed: u64, stream: u64, index: usize) -> StdRng {
    StdRng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).rotate_left(32))
}

fn random_point(rng: &mut StdRng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-half_width..half_width)).collect()
}

fn random_network(rng: &mut StdRng, n: usize) -> Result<NetworkSpec> {
    let mut j = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let x = if a == b {
                rng.gen_range(-0.5..0.5)
            } else {
                rng.gen_range(-1.0..1.0)
            };
            j[a * n + b] = x;
            j[b * n + a] = x;
        }
    }
    let r = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let i = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NetworkSpec::new(j, r, i)
}

fn random_hopfield(rng: &mut StdRng, n: usize) -> Result<EnergyFunction> {
    Ok(EnergyFunction::hopfield(
        random_network(rng, n)?,
        ConvexPotential::Softplus,
    ))
}

/// Largest value of `f` over `count` seeded draws, evaluated in parallel.
fn max_over<F>(seed: u64, stream: u64, count: usize, f: F) -> Result<f64>
where
    F: Fn(&mut StdRng, usize) -> Result<f64> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|k| f(&mut draw_rng(seed, stream, k), k))
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn legendre(seed: u64) -> Vec<Check> {
    let s = Suite::Legendre;
    let p = ConvexPotential::Softplus;
    let involution = max_over(seed, 1, 1000, |rng, _| {
        let x: f64 = rng.gen_range(-10.0..10.0);
        let y = p.d1(x);
        Ok((p.value(x) + legendre_dual(&p, y)?.psi_star - x * y).abs())
    });
    let round_trip = max_over(seed, 2, 200, |rng, k| {
        let n = 1 + k % 4;
        let sp = SeparablePotential::softplus(n)?;
        let u = random_point(rng, n, 10.0);
        let back = sp.from_dual(&sp.to_dual(&u)?)?;
        Ok(u.iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max))
    });
    let quadrature = (1..100)
        .map(|k| {
            let v = k as f64 / 100.0;
            let integral = quad::integrate(|t| Ok(t.ln() - (-t).ln_1p()), 0.0, v, 1e-14)?;
            Ok((integral - p.dual_value(v)?).abs())
        })
        .try_fold(0.0f64, |m, r: Result<f64>| r.map(|x| m.max(x)));
    let monotone = max_over(seed, 3, 1000, |rng, _| {
        let x: f64 = rng.gen_range(-30.0..30.0);
        // psi'' is even; difference on the left tail where sigma keeps its digits
        let t = -x.abs();
        let h = 1e-5 * t.abs().max(1.0);
        let fd = (p.d1(t + h) - p.d1(t - h)) / (2.0 * h);
        if p.d2(x) <= 0.0 {
            return Err(Error::Numerical(format!("psi'' not positive at {x}")));
        }
        Ok(relative(fd, p.d2(x)))
    });
    vec![
        Check::at_most(s, "psi + psi* = x psi'", involution, 1e-10),
        Check::at_most(s, "U -> V -> U round trip (rel)", round_trip, 1e-10),
        Check::at_most(s, "integral of inverse activation = psi*", quadrature, 1e-8),
        Check::at_most(s, "psi'' > 0 and matches FD of psi' (rel)", monotone, 1e-5),
    ]
}

fn geometry(seed: u64) -> Vec<Check> {
    let s = Suite::Geometry;
    let steps = StepRule::default();
    let dual = max_over(seed, 11, 100, |rng, k| {
        let n = [1, 2, 4][k % 3];
        dual_metric_check(&SeparablePotential::softplus(n)?, &random_point(rng, n, 3.0))
    });
    let inverse = max_over(seed, 12, 100, |rng, k| {
        let n = 1 + k % 4;
        Ok(metric_at(&SeparablePotential::softplus(n)?, &random_point(rng, n, 5.0))?.inverse_residual())
    });
    let pairing = max_over(seed, 13, 100, |rng, _| {
        let energy = random_hopfield(rng, 3)?;
        metric_pairing_residual(&energy, &SeparablePotential::softplus(3)?, &random_point(rng, 3, 3.0))
    });
    let closed = max_over(seed, 14, 100, |rng, _| {
        let energy = random_hopfield(rng, 3)?;
        let sp = SeparablePotential::softplus(3)?;
        let u = random_point(rng, 3, 2.0);
        let omega = flow_one_form(&energy, &sp)(&u)?;
        let scale = omega.iter().map(|w| w * w).sum::<f64>().sqrt().max(1.0);
        Ok(one_form_closedness(&energy, &sp, &u)? / scale)
    });
    let asymmetric = (|| {
        let spec = NetworkSpec::new_unchecked(
            vec![0.0, 0.8, 0.0, -0.2, 0.0, 0.5, 0.3, 0.5, 0.0],
            vec![1.0; 3],
            vec![0.0; 3],
        )?;
        let energy = EnergyFunction::hopfield(spec, ConvexPotential::Softplus);
        one_form_closedness(&energy, &SeparablePotential::softplus(3)?, &[0.2, -0.4, 0.6])
    })();
    let coderivative = max_over(seed, 15, 50, |rng, k| {
        let n = 1 + k % 3;
        let sp = SeparablePotential::softplus(n)?;
        let energy = if k % 2 == 0 {
            EnergyFunction::QuadraticIdentity
        } else {
            random_hopfield(rng, n)?
        };
        let u = random_point(rng, n, 2.5);
        let c = coderivative_of(&flow_one_form(&energy, &sp), &sp, &u, &steps)?;
        Ok((c - kappa_closed_form(&energy, &sp, &u)?).abs())
    });
    vec![
        Check::at_most(s, "inverse metric = dual Hessian", dual, 1e-5),
        Check::at_most(s, "g g^-1 = I", inverse, 1e-12),
        Check::at_most(s, "g(Xdot) = -dH", pairing, 1e-12),
        Check::at_most(s, "d(metric dual of X) / max(1,|w|), symmetric J", closed, 1e-5),
        Check::build(
            s,
            "d(metric dual of X), asymmetric J (must exceed)",
            asymmetric,
            1e-5,
            |m| m > 1e-5,
        ),
        Check::at_most(s, "co-derivative of -dH = kappa", coderivative, 1e-4),
    ]
}

fn lyapunov(seed: u64) -> Vec<Check> {
    let s = Suite::Lyapunov;
    let identity = max_over(seed, 21, 1000, |rng, k| {
        let n = 1 + k % 4;
        let energy = random_hopfield(rng, n)?;
        let rate = lyapunov_rate(&energy, &SeparablePotential::softplus(n)?, &random_point(rng, n, 3.0))?;
        Ok(relative(rate.dh_dt, rate.minus_g_xx))
    });
    let cfg = IntegratorConfig {
        record_every: 50,
        ..IntegratorConfig::new(1e-3, 5.0)
    };
    let trajectories = (0..16)
        .into_par_iter()
        .map(|k| {
            let rng = &mut draw_rng(seed, 22, k);
            let model = GeneralizedHopfield::new(random_hopfield(rng, 2)?, SeparablePotential::softplus(2)?)?;
            let record = integrate(&model, &random_point(rng, 2, 3.0), &cfg)?;
            if record.failed() {
                return Err(Error::Numerical(format!("{:?}", record.termination)));
            }
            let mut rel: f64 = 0.0;
            for row in &record.rows {
                let rate = lyapunov_rate(&model.energy, &model.potential, &row.u)?;
                rel = rel.max(relative(row.dh_dt, rate.minus_g_xx));
            }
            Ok((lyapunov_audit(&record), rel))
        })
        .collect::<Result<Vec<_>>>();
    let (audit, rows) = match trajectories {
        Ok(v) => (
            Ok(v.iter().map(|t| t.0).fold(0.0, f64::max)),
            Ok(v.iter().map(|t| t.1).fold(0.0, f64::max)),
        ),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    vec![
        Check::at_most(s, "dH/dt = -g(X,X) at random points (rel)", identity, 1e-10),
        Check::at_most(s, "largest H increase along 16 trajectories", audit, 1e-9),
        Check::at_most(s, "recorded dH/dt = -g(X,X) (rel)", rows, 1e-8),
    ]
}

fn kappa(seed: u64) -> Vec<Check> {
    let s = Suite::Kappa;
    let steps = StepRule::default();
    let mut checks: Vec<Check> = [1usize, 2, 4, 16]
        .iter()
        .map(|&n| {
            let err = (|| {
                let model =
                    GeneralizedHopfield::new(EnergyFunction::QuadraticIdentity, SeparablePotential::softplus(n)?)?;
                let u = vec![0.0; n];
                let r = kappa_report(&model.energy, &model.potential, &u)?;
                let expected = -(n as f64) / 4.0;
                Ok([r.kappa_closed_form, r.kappa_laplacian, r.kappa_divergence]
                    .iter()
                    .map(|k| (k - expected).abs())
                    .fold(0.0, f64::max))
            })();
            Check::at_most(s, &format!("kappa(0) = -n/4, n = {n}"), err, 1e-5)
        })
        .collect();
    let steady = (|| {
        let spec = NetworkSpec::new(
            vec![0.0, 0.3, -0.3, 0.3, 0.0, 0.3, -0.3, 0.3, 0.0],
            vec![1.0, 2.0, 4.0],
            vec![0.1, -0.2, 0.0],
        )?;
        let model = GeneralizedHopfield::new(
            EnergyFunction::hopfield(spec, ConvexPotential::Softplus),
            SeparablePotential::softplus(3)?,
        )?;
        let cfg = IntegratorConfig {
            record_every: 1000,
            ..IntegratorConfig::new(1e-2, 1000.0)
        };
        let u = find_steady_state(&model, &[0.0; 3], &cfg)?;
        let r = kappa_report(&model.energy, &model.potential, &u)?;
        Ok([r.kappa_closed_form, r.kappa_laplacian, r.kappa_divergence]
            .iter()
            .map(|k| (k + 1.75).abs())
            .fold(0.0, f64::max))
    })();
    checks.push(Check::at_most(s, "steady-state kappa = -sum 1/R", steady, 1e-5));
    let routes = max_over(seed, 31, 200, |rng, k| {
        let n = [1, 2, 4][k % 3];
        let sp = SeparablePotential::softplus(n)?;
        let energy = if k % 2 == 0 {
            EnergyFunction::QuadraticIdentity
        } else {
            random_hopfield(rng, n)?
        };
        let u = random_point(rng, n, 3.0);
        let closed = kappa_closed_form(&energy, &sp, &u)?;
        let lap = kappa_laplacian(&energy, &sp, &u, &steps)?;
        let div = kappa_divergence_oracle(&|x: &[f64]| vector_field(&energy, &sp, x), &sp, &u, &steps)?;
        let residual = (closed - lap).abs().max((closed - div).abs()).max((lap - div).abs());
        Ok(residual / closed.abs().max(1.0))
    });
    checks.push(Check::at_most(s, "three routes agree / max(1,|kappa|)", routes, 1e-4));
    checks
}

fn volume() -> Vec<Check> {
    let s = Suite::Volume;
    let gradient = (|| {
        let model = GeneralizedHopfield::new(EnergyFunction::QuadraticIdentity, SeparablePotential::softplus(2)?)?;
        volume_contraction_run(&model, &[1.0, -1.0], 5.0, 1e-3)
            .map(|l| l.relative_discrepancy)
            .map_err(|e| e.cause)
    })();
    let linear = volume_contraction_run(
        &LinearField {
            rates: vec![1.0, 2.0, 3.0],
        },
        &[0.5, -1.0, 2.0],
        1.0,
        1e-3,
    )
    .map(|l| (l.log_volume_ratio + 6.0).abs().max((l.kappa_integral + 6.0).abs()))
    .map_err(|e| e.cause);
    let hamiltonian = volume_contraction_run(&PlanarHamiltonian, &[1.0, 0.5], 10.0, 1e-3)
        .map(|l| l.log_volume_ratio.abs().max(l.kappa_integral.abs()))
        .map_err(|e| e.cause);
    vec![
        Check::at_most(s, "gradient system ledger (rel)", gradient, 1e-3),
        Check::at_most(s, "linear field contracts at -6", linear, 1e-6),
        Check::at_most(s, "Hamiltonian field preserves volume", hamiltonian, 1e-6),
    ]
}

fn amplified_network(rng: &mut StdRng, n: usize) -> Result<CohenGrossbergSpec> {
    let net = random_network(rng, n)?;
    let a = vec![CoordinateFn::Polynomial(vec![1.0, 0.0, 0.1]); n];
    let b = (0..n)
        .map(|k| CoordinateFn::Polynomial(vec![net.currents()[k], -1.0 / net.resistances()[k]]))
        .collect();
    let c = net.couplings().iter().map(|x| -x).collect();
    CohenGrossbergSpec::new(a, b, c, ConvexPotential::Softplus)
}

fn cohen_grossberg(seed: u64) -> Vec<Check> {
    let s = Suite::CohenGrossberg;
    let embedding = max_over(seed, 41, 50, |rng, k| {
        let n = 1 + k % 4;
        let net = random_network(rng, n)?;
        let cg = CohenGrossbergSpec::from_network(&net, ConvexPotential::Softplus)?;
        let u = random_point(rng, n, 3.0);
        let a = cohen_grossberg_field(&cg, &u)?;
        let b = vector_field(
            &EnergyFunction::hopfield(net, ConvexPotential::Softplus),
            &SeparablePotential::softplus(n)?,
            &u,
        )?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    });
    let cfg = IntegratorConfig {
        record_every: 100,
        ..IntegratorConfig::new(1e-3, 2.0)
    };
    let runs = (0..8)
        .into_par_iter()
        .map(|k| {
            let rng = &mut draw_rng(seed, 42, k);
            let spec = amplified_network(rng, 2)?;
            let record = integrate(&spec, &random_point(rng, 2, 3.0), &cfg)?;
            if record.failed() {
                return Err(Error::Numerical(format!("{:?}", record.termination)));
            }
            let step = record
                .rows
                .windows(2)
                .map(|w| w[1].h - w[0].h)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut rel: f64 = 0.0;
            for row in &record.rows {
                let l = cohen_grossberg_lyapunov(&spec, &row.u)?;
                let x = cohen_grossberg_field(&spec, &row.u)?;
                let delta = 1e-4 / x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let shifted =
                    |sign: f64| -> Vec<f64> { row.u.iter().zip(&x).map(|(u, x)| u + sign * delta * x).collect() };
                let fd = (cohen_grossberg_h_prime(&spec, &shifted(1.0))?
                    - cohen_grossberg_h_prime(&spec, &shifted(-1.0))?)
                    / (2.0 * delta);
                rel = rel.max(relative(fd, l.dh_prime_dt));
            }
            Ok((step, rel))
        })
        .collect::<Result<Vec<_>>>();
    let (step, slope) = match runs {
        Ok(v) => (
            Ok(v.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max)),
            Ok(v.iter().map(|t| t.1).fold(0.0, f64::max)),
        ),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    vec![
        Check::at_most(s, "unit amplification reproduces Hopfield", embedding, 1e-12),
        Check::below(s, "largest H' step between rows (must be < 0)", step, 0.0),
        Check::at_most(s, "dH'/dt matches FD slope (rel)", slope, 1e-5),
    ]
}
