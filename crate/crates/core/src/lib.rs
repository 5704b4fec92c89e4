//! Generalized Hopfield dynamics on Hessian manifolds.
//!
//! A strictly convex potential `Psi` on the state space induces a Riemannian
//! metric `g = Hess Psi` and a dual chart `V = grad Psi`. Systems of the form
//! `dU/dt = -dH/dV` are gradient flows of `H` for that metric, `H` decreases
//! at the rate `g(X, X)`, and the flow contracts the metric volume at the rate
//! `kappa = -Lap_g H`. This crate evaluates all of these objects numerically
//! and cross-checks them:
//!
//! * [`potentials`]: convex potentials, Legendre duals and the coordinate maps.
//! * [`geometry`]: the Hessian metric, Laplace-Beltrami operator, co-derivative
//!   and closedness checks.
//! * [`models`]: energies, the Hopfield network and the Cohen-Grossberg class.
//! * [`compressibility`]: `kappa` by three routes and the volume ledger.
//! * [`dynamics`]: RK4 integration with Lyapunov monitoring.
//! * [`verify`]: seeded property suites with pass/fail tables.

pub mod compressibility;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod models;
pub mod ode;
pub mod potentials;
pub mod quad;
pub mod verify;

pub use compressibility::{
    kappa_closed_form, kappa_divergence_oracle, kappa_laplacian, kappa_report, volume_contraction_run,
    GeneralizedHopfield, KappaReport, LinearField, PlanarHamiltonian, VolumeLedger,
};
pub use dynamics::{integrate, lyapunov_audit, IntegratorConfig, Termination, TrajectoryRecord};
pub use error::{Error, Result};
pub use geometry::{metric_at, HessianMetricPoint, StepRule};
pub use models::{CohenGrossbergSpec, EnergyFunction, NetworkSpec};
pub use ode::Flow;
pub use potentials::{ConvexPotential, SeparablePotential};
