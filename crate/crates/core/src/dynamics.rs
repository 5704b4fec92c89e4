//! Fixed-step integration of the model flows with Lyapunov monitoring.

use serde::Serialize;

use crate::compressibility::GeneralizedHopfield;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::metric_at;
use crate::models::{cohen_grossberg_lyapunov, lyapunov_rate, CohenGrossbergSpec, STEADY_TOL};
use crate::ode::{rk4_step, Flow};
use crate::potentials::SeparablePotential;

/// Largest tolerated increase of the Lyapunov function between steps.
pub const LYAPUNOV_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 20.0,
            steady_tol: STEADY_TOL,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.dt) && positive(self.t_max) && positive(self.steady_tol)) {
            return Err(Error::Config(format!(
                "dt, t_max and steady_tol must be positive and finite (got {}, {}, {})",
                self.dt, self.t_max, self.steady_tol
            )));
        }
        if self.dt >= self.t_max {
            return Err(Error::Config(format!(
                "dt = {} must be smaller than t_max = {}",
                self.dt, self.t_max
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Quantities monitored at a state, besides the state itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub v: Vec<f64>,
    pub h: f64,
    pub dh_dt: f64,
    pub kappa: f64,
    /// `sqrt(g(X, X))`.
    pub field_norm_g: f64,
}

/// A flow with a Lyapunov function to monitor.
pub trait MonitoredFlow: Flow {
    fn observe(&self, u: &[f64], xdot: &[f64]) -> Result<Observation>;
}

impl MonitoredFlow for GeneralizedHopfield {
    fn observe(&self, u: &[f64], xdot: &[f64]) -> Result<Observation> {
        let v = self.potential.to_dual(u)?;
        let h = self.energy.value(u, &v)?;
        let rate = lyapunov_rate(&self.energy, &self.potential, u)?;
        let metric = metric_at(&self.potential, u)?;
        Ok(Observation {
            v,
            h,
            dh_dt: rate.dh_dt,
            kappa: self.kappa(u)?,
            field_norm_g: metric.norm_sq(xdot).max(0.0).sqrt(),
        })
    }
}

impl MonitoredFlow for CohenGrossbergSpec {
    fn observe(&self, u: &[f64], xdot: &[f64]) -> Result<Observation> {
        let sp = SeparablePotential::new(self.potential().clone(), self.dim())?;
        let v = sp.to_dual(u)?;
        let l = cohen_grossberg_lyapunov(self, u)?;
        let metric = metric_at(&sp, u)?;
        Ok(Observation {
            v,
            h: l.h_prime,
            dh_dt: l.dh_prime_dt,
            kappa: self.kappa(u)?,
            field_norm_g: metric.norm_sq(xdot).max(0.0).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: f64,
    pub dh_dt: f64,
    pub kappa: f64,
    pub field_norm_g: f64,
}

impl TrajectoryRow {
    fn new(t: f64, u: Vec<f64>, obs: Observation) -> Self {
        Self {
            t,
            u,
            v: obs.v,
            h: obs.h,
            dh_dt: obs.dh_dt,
            kappa: obs.kappa,
            field_norm_g: obs.field_norm_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    TMaxReached,
    SteadyState,
    NumericalFailure { step: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub termination: Termination,
}

impl TrajectoryRecord {
    pub fn failed(&self) -> bool {
        matches!(self.termination, Termination::NumericalFailure { .. })
    }

    pub fn last(&self) -> &TrajectoryRow {
        self.rows.last().expect("records always hold the initial row")
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Advance `model` from `u0` with classical RK4.
///
/// Stops when `|X|_inf < steady_tol`, at `t_max`, or at the first step that
/// raises the Lyapunov function by more than [`LYAPUNOV_SLACK`] or leaves the
/// finite range; the offending row is recorded in the last case.
pub fn integrate<M>(model: &M, u0: &[f64], cfg: &IntegratorConfig) -> Result<TrajectoryRecord>
where
    M: MonitoredFlow + ?Sized,
{
    cfg.validate()?;
    check_dim(model.dim(), u0.len())?;
    check_finite(u0, "U0")?;

    let steps = (cfg.t_max / cfg.dt - 1e-9).ceil() as usize;
    let mut u = u0.to_vec();
    let mut xdot = model.field(&u)?;
    let first = model.observe(&u, &xdot)?;
    let mut prev_h = first.h;
    let mut rows = vec![TrajectoryRow::new(0.0, u.clone(), first)];
    if sup_norm(&xdot) < cfg.steady_tol {
        return Ok(TrajectoryRecord {
            rows,
            termination: Termination::SteadyState,
        });
    }

    let field = |x: &[f64]| model.field(x);
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        let advanced = rk4_step(&field, &u, cfg.dt).and_then(|next| {
            let xd = model.field(&next)?;
            let obs = model.observe(&next, &xd)?;
            if !obs.h.is_finite() {
                return Err(Error::Numerical(format!("Lyapunov function became {}", obs.h)));
            }
            Ok((next, xd, obs))
        });
        let (next, xd, obs) = match advanced {
            Ok(v) => v,
            Err(e) => {
                return Ok(TrajectoryRecord {
                    rows,
                    termination: Termination::NumericalFailure {
                        step,
                        message: e.to_string(),
                    },
                })
            }
        };
        u = next;
        xdot = xd;
        let increase = obs.h - prev_h;
        prev_h = obs.h;
        let steady = sup_norm(&xdot) < cfg.steady_tol;
        let violated = increase > LYAPUNOV_SLACK;
        if violated || steady || step % cfg.record_every == 0 || step == steps {
            rows.push(TrajectoryRow::new(t, u.clone(), obs));
        }
        if violated {
            return Ok(TrajectoryRecord {
                rows,
                termination: Termination::NumericalFailure {
                    step,
                    message: format!("Lyapunov function increased by {increase:e}"),
                },
            });
        }
        if steady {
            return Ok(TrajectoryRecord {
                rows,
                termination: Termination::SteadyState,
            });
        }
    }
    Ok(TrajectoryRecord {
        rows,
        termination: Termination::TMaxReached,
    })
}

/// Largest increase of the Lyapunov function between consecutive rows,
/// floored at zero. The run passes when this is at most [`LYAPUNOV_SLACK`].
pub fn lyapunov_audit(record: &TrajectoryRecord) -> f64 {
    record.rows.windows(2).map(|w| w[1].h - w[0].h).fold(0.0, f64::max)
}

/// Integrate until the field vanishes; errors if `t_max` passes first.
pub fn find_steady_state<M>(model: &M, u0: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>>
where
    M: MonitoredFlow + ?Sized,
{
    let record = integrate(model, u0, cfg)?;
    match record.termination {
        Termination::SteadyState => Ok(record.last().u.clone()),
        Termination::TMaxReached => Err(Error::Numerical(format!(
            "no steady state within t = {} (last |X| = {:e})",
            cfg.t_max,
            sup_norm(&model.field(&record.last().u)?)
        ))),
        Termination::NumericalFailure { step, message } => Err(Error::Numerical(format!(
            "integration failed at step {step}: {message}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EnergyFunction, NetworkSpec};
    use crate::potentials::ConvexPotential;

    fn hopfield(j: Vec<f64>, r: Vec<f64>, i: Vec<f64>) -> GeneralizedHopfield {
        let n = r.len();
        GeneralizedHopfield::new(
            EnergyFunction::hopfield(NetworkSpec::new(j, r, i).unwrap(), ConvexPotential::Softplus),
            SeparablePotential::softplus(n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gradient_system_drifts_without_equilibrium() {
        let model = GeneralizedHopfield::new(
            EnergyFunction::QuadraticIdentity,
            SeparablePotential::softplus(1).unwrap(),
        )
        .unwrap();
        let cfg = IntegratorConfig {
            record_every: 100,
            ..IntegratorConfig::new(1e-2, 50.0)
        };
        let rec = integrate(&model, &[4.0], &cfg).unwrap();
        assert_eq!(rec.termination, Termination::TMaxReached);
        assert!(rec.rows.windows(2).all(|w| w[1].h < w[0].h && w[1].u[0] < w[0].u[0]));
        assert!(rec.last().u[0] < 0.0);
    }

    #[test]
    fn single_unit_converges_to_its_rest_point() {
        let model = hopfield(vec![0.0], vec![1.0], vec![0.5]);
        let cfg = IntegratorConfig {
            record_every: 50,
            ..IntegratorConfig::new(1e-2, 60.0)
        };
        let rec = integrate(&model, &[2.0], &cfg).unwrap();
        assert_eq!(rec.termination, Termination::SteadyState);
        // the field is -U + 0.5, so |U - 0.5| equals the final field norm
        assert!((rec.last().u[0] - 0.5).abs() < 1e-10);
        assert!(lyapunov_audit(&rec) <= LYAPUNOV_SLACK);
    }

    #[test]
    fn steady_start_terminates_immediately() {
        let model = hopfield(vec![0.0], vec![1.0], vec![0.0]);
        let rec = integrate(&model, &[0.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(rec.termination, Termination::SteadyState);
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(lyapunov_audit(&rec), 0.0);
    }

    #[test]
    fn coarse_steps_on_stiff_network_are_flagged() {
        let model = hopfield(vec![0.0, 0.5, 0.5, 0.0], vec![0.1, 0.1], vec![1.0, -1.0]);
        let rec = integrate(&model, &[2.0, -2.0], &IntegratorConfig::new(1.0, 20.0)).unwrap();
        assert!(matches!(rec.termination, Termination::NumericalFailure { .. }));
        assert!(lyapunov_audit(&rec) > LYAPUNOV_SLACK);
    }

    #[test]
    fn rows_are_consistent() {
        let model = hopfield(vec![0.0, 0.4, 0.4, 0.0], vec![1.0, 2.0], vec![0.2, -0.1]);
        let cfg = IntegratorConfig {
            record_every: 10,
            ..IntegratorConfig::new(1e-2, 5.0)
        };
        let rec = integrate(&model, &[1.5, -2.0], &cfg).unwrap();
        assert!(rec.rows.windows(2).all(|w| w[1].t > w[0].t));
        for row in &rec.rows {
            let g2 = row.field_norm_g * row.field_norm_g;
            assert!((row.dh_dt + g2).abs() <= 1e-8 * g2.max(f64::MIN_POSITIVE));
            assert_eq!(row.kappa, model.kappa(&row.u).unwrap());
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let model = hopfield(vec![0.0], vec![1.0], vec![0.0]);
        assert!(integrate(&model, &[0.0], &IntegratorConfig::new(2.0, 1.0)).is_err());
        assert!(integrate(&model, &[0.0, 1.0], &IntegratorConfig::default()).is_err());
        let cfg = IntegratorConfig {
            record_every: 0,
            ..IntegratorConfig::default()
        };
        assert!(integrate(&model, &[0.0], &cfg).is_err());
    }

    #[test]
    fn rk4_is_fourth_order() {
        let model = hopfield(vec![0.0, 0.6, 0.6, 0.0], vec![1.0, 0.5], vec![0.3, -0.2]);
        let u0 = [1.0, -1.5];
        let t = 2.0;
        let run = |dt: f64| {
            let cfg = IntegratorConfig {
                steady_tol: 1e-300,
                record_every: usize::MAX,
                ..IntegratorConfig::new(dt, t)
            };
            integrate(&model, &u0, &cfg).unwrap().last().u.clone()
        };
        let dt = 0.1;
        let reference = run(dt / 16.0);
        let err = |u: Vec<f64>| u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ratio = err(run(dt)) / err(run(dt / 2.0));
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}
