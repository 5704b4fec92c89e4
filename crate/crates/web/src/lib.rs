//! Browser bindings for the interactive demo page in `www/`.
//!
//! The computations are plain Rust functions so they can be tested natively;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use hessflow::compressibility::{kappa_closed_form, kappa_divergence_oracle, kappa_laplacian};
use hessflow::dynamics::{integrate, IntegratorConfig, Termination};
use hessflow::geometry::StepRule;
use hessflow::models::{EnergyFunction, NetworkSpec};
use hessflow::ode::Flow;
use hessflow::potentials::{legendre_dual, softplus, ConvexPotential};
use hessflow::{Error, GeneralizedHopfield, Result, SeparablePotential};
use wasm_bindgen::prelude::*;

/// Values per trajectory row for a network of `n` units:
/// `t, U (n), V (n), H, dH/dt, kappa, |X|_g`.
pub fn row_stride(n: usize) -> usize {
    2 * n + 5
}

/// Softplus Hopfield network of `n` units with `J` row-major, or the gradient
/// system `H = |V|^2 / 2` when `j` is empty.
pub fn build_model(n: usize, j: &[f64], r: &[f64], i_ext: &[f64]) -> Result<GeneralizedHopfield> {
    let potential = SeparablePotential::softplus(n)?;
    if j.is_empty() {
        return GeneralizedHopfield::new(EnergyFunction::QuadraticIdentity, potential);
    }
    let spec = NetworkSpec::new(j.to_vec(), r.to_vec(), i_ext.to_vec())?;
    GeneralizedHopfield::new(EnergyFunction::hopfield(spec, ConvexPotential::Softplus), potential)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Closed,
    Laplacian,
    Divergence,
    /// Largest pairwise disagreement of the three routes.
    Spread,
}

impl Route {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Route::Closed),
            "laplacian" => Ok(Route::Laplacian),
            "divergence" => Ok(Route::Divergence),
            "spread" => Ok(Route::Spread),
            other => Err(Error::Config(format!("unknown route `{other}`"))),
        }
    }
}

/// `kappa` on an `m x m` grid over `[lo, hi]^2` for a two-unit model,
/// row-major with `U_2` varying slowest (row 0 is `U_2 = lo`).
pub fn kappa_grid(model: &GeneralizedHopfield, lo: f64, hi: f64, m: usize, route: Route) -> Result<Vec<f64>> {
    if model.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: model.dim(),
        });
    }
    if m < 2 || !(lo < hi) {
        return Err(Error::Config("grid needs m >= 2 and lo < hi".into()));
    }
    let steps = StepRule::default();
    let axis: Vec<f64> = (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect();
    let mut out = Vec::with_capacity(m * m);
    for &u2 in &axis {
        for &u1 in &axis {
            let u = [u1, u2];
            let closed = || kappa_closed_form(&model.energy, &model.potential, &u);
            let lap = || kappa_laplacian(&model.energy, &model.potential, &u, &steps);
            let div = || kappa_divergence_oracle(&|x: &[f64]| model.field(x), &model.potential, &u, &steps);
            out.push(match route {
                Route::Closed => closed()?,
                Route::Laplacian => lap()?,
                Route::Divergence => div()?,
                Route::Spread => {
                    let (c, l, d) = (closed()?, lap()?, div()?);
                    (c - l).abs().max((c - d).abs()).max((l - d).abs())
                }
            });
        }
    }
    Ok(out)
}

/// Trajectory rows flattened with [`row_stride`], plus the termination reason.
pub fn trajectory(
    model: &GeneralizedHopfield,
    u0: &[f64],
    dt: f64,
    t_max: f64,
    every: usize,
) -> Result<(Vec<f64>, String)> {
    let cfg = IntegratorConfig {
        record_every: every,
        ..IntegratorConfig::new(dt, t_max)
    };
    let record = integrate(model, u0, &cfg)?;
    let mut flat = Vec::with_capacity(record.rows.len() * row_stride(u0.len()));
    for row in &record.rows {
        flat.push(row.t);
        flat.extend(&row.u);
        flat.extend(&row.v);
        flat.extend([row.h, row.dh_dt, row.kappa, row.field_norm_g]);
    }
    let reason = match &record.termination {
        Termination::TMaxReached => "reached t_max".to_string(),
        Termination::SteadyState => "steady state".to_string(),
        Termination::NumericalFailure { step, message } => format!("numerical failure at step {step}: {message}"),
    };
    Ok((flat, reason))
}

/// Softplus, its derivative and the Legendre dual sampled on `m` points:
/// `[x, psi(x), psi'(x)]` over `[-range, range]` followed by `[V, psi*(V)]` over
/// the open unit interval.
pub fn legendre_curves(range: f64, m: usize) -> Result<Vec<f64>> {
    if m < 2 || !(range > 0.0) {
        return Err(Error::Config("curves need m >= 2 and a positive range".into()));
    }
    let p = ConvexPotential::Softplus;
    let mut out = Vec::with_capacity(5 * m);
    for k in 0..m {
        let x = -range + 2.0 * range * k as f64 / (m - 1) as f64;
        out.extend([x, softplus(x), p.d1(x)]);
    }
    for k in 0..m {
        let v = (k as f64 + 0.5) / m as f64;
        out.extend([v, legendre_dual(&p, v)?.psi_star]);
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `kappa` heat map for a two-unit network (empty `j` selects the gradient
/// system); see [`kappa_grid`].
#[wasm_bindgen(js_name = kappaHeatmap)]
pub fn kappa_heatmap(
    j: &[f64],
    r: &[f64],
    i_ext: &[f64],
    lo: f64,
    hi: f64,
    m: usize,
    route: &str,
) -> std::result::Result<Vec<f64>, JsError> {
    let model = build_model(2, j, r, i_ext).map_err(js)?;
    kappa_grid(&model, lo, hi, m, Route::parse(route).map_err(js)?).map_err(js)
}

#[wasm_bindgen]
pub struct Trajectory {
    data: Vec<f64>,
    stride: usize,
    termination: String,
}

#[wasm_bindgen]
impl Trajectory {
    #[wasm_bindgen(getter)]
    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[wasm_bindgen(getter)]
    pub fn termination(&self) -> String {
        self.termination.clone()
    }
}

#[wasm_bindgen]
pub fn simulate(
    j: &[f64],
    r: &[f64],
    i_ext: &[f64],
    u0: &[f64],
    dt: f64,
    t_max: f64,
    every: usize,
) -> std::result::Result<Trajectory, JsError> {
    let model = build_model(u0.len(), j, r, i_ext).map_err(js)?;
    let (data, termination) = trajectory(&model, u0, dt, t_max, every).map_err(js)?;
    Ok(Trajectory {
        data,
        stride: row_stride(u0.len()),
        termination,
    })
}

#[wasm_bindgen(js_name = legendreCurves)]
pub fn legendre_curves_js(range: f64, m: usize) -> std::result::Result<Vec<f64>, JsError> {
    legendre_curves(range, m).map_err(js)
}
