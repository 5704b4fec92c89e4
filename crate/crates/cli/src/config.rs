//! Run configuration: JSON schema, validation and model construction.

use std::fmt;
use std::path::{Path, PathBuf};

use hessflow::models::{CohenGrossbergSpec, CoordinateFn, EnergyFunction, NetworkSpec};
use hessflow::{ConvexPotential, GeneralizedHopfield, IntegratorConfig, SeparablePotential};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub potential: PotentialConfig,
    pub model: ModelConfig,
    pub initial_conditions: InitialConditions,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub name: PotentialName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<PotentialParameters>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    Softplus,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParameters {
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `H = sum V^2 / 2`.
    Gradient,
    Hopfield {
        #[serde(rename = "J")]
        j: Vec<f64>,
        #[serde(rename = "R")]
        r: Vec<f64>,
        #[serde(rename = "I_ext")]
        i_ext: Vec<f64>,
    },
    CohenGrossberg {
        #[serde(rename = "C")]
        c: Vec<f64>,
        /// Ascending polynomial coefficients per coordinate.
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConditions {
    List(Vec<Vec<f64>>),
    Random { random: RandomBox },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBox {
    pub count: usize,
    pub seed: Option<u64>,
    /// `[lo, hi]`, applied to every coordinate.
    #[serde(rename = "box")]
    pub bounds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_steady_tol() -> f64 {
    IntegratorConfig::default().steady_tol
}

fn default_record_every() -> usize {
    IntegratorConfig::default().record_every
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            dt: d.dt,
            t_max: d.t_max,
            steady_tol: d.steady_tol,
            record_every: d.record_every,
        }
    }
}

impl From<&IntegratorSection> for IntegratorConfig {
    fn from(s: &IntegratorSection) -> Self {
        IntegratorConfig {
            dt: s.dt,
            t_max: s.t_max,
            steady_tol: s.steady_tol,
            record_every: s.record_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_output_path")]
    pub path: PathBuf,
}

fn default_output_path() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: OutputFormat::default(),
            path: default_output_path(),
        }
    }
}

/// A configuration problem, anchored to a position in the source text when
/// one can be found.
#[derive(Debug)]
pub struct ConfigError {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Validation failure with the config key it concerns.
struct Invalid {
    key: &'static str,
    message: String,
}

fn invalid(key: &'static str, message: impl Into<String>) -> Invalid {
    Invalid {
        key,
        message: message.into(),
    }
}

/// Line and column (both 1-based) of the first `"key":` in `text`.
pub fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let quoted = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        let mut from = 0;
        while let Some(pos) = line[from..].find(&quoted) {
            let start = from + pos;
            let rest = line[start + quoted.len()..].trim_start();
            if rest.starts_with(':') {
                return Some((i + 1, start + 1));
            }
            from = start + quoted.len();
        }
    }
    None
}

/// Everything a run needs, built from a validated config.
pub struct Experiment {
    pub config: RunConfig,
    pub model: Model,
    pub initial_conditions: Vec<Vec<f64>>,
    pub integrator: IntegratorConfig,
    pub output_dir: PathBuf,
}

pub enum Model {
    Hopfield(GeneralizedHopfield),
    CohenGrossberg(CohenGrossbergSpec),
}

impl RunConfig {
    pub fn parse(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Read, parse and validate `path`. `seed_override` replaces the seed of
/// random initial conditions.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Experiment, ConfigError> {
    let fail = |line, column, message: String| ConfigError {
        file: path.to_path_buf(),
        line,
        column,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(None, None, format!("cannot read config: {e}")))?;
    let config = RunConfig::parse(&text).map_err(|e| {
        let msg = e.to_string();
        // serde_json appends " at line L column C"; the position is reported separately
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        fail(Some(e.line()), Some(e.column()), msg)
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    build(config, base, seed_override).map_err(|inv| {
        let (line, column) = locate_key(&text, inv.key).map_or((None, None), |(l, c)| (Some(l), Some(c)));
        fail(line, column, inv.message)
    })
}

fn build(config: RunConfig, base: &Path, seed_override: Option<u64>) -> Result<Experiment, Invalid> {
    let n = config.dimension;
    if n == 0 {
        return Err(invalid("dimension", "dimension must be at least 1"));
    }
    let potential = match (config.potential.name, &config.potential.parameters) {
        (PotentialName::Softplus, None) => ConvexPotential::Softplus,
        (PotentialName::Softplus, Some(_)) => {
            return Err(invalid("parameters", "softplus takes no parameters"));
        }
        (PotentialName::Quadratic, p) => {
            let c = p.as_ref().map_or(1.0, |p| p.coefficient);
            ConvexPotential::quadratic(c).map_err(|e| invalid("coefficient", e.to_string()))?
        }
    };
    let sp = SeparablePotential::new(potential.clone(), n).map_err(|e| invalid("potential", e.to_string()))?;
    let expect_len = |key: &'static str, got: usize, want: usize| -> Result<(), Invalid> {
        if got == want {
            Ok(())
        } else {
            Err(invalid(
                key,
                format!("{key} must have {want} entries for dimension {n}, got {got}"),
            ))
        }
    };
    let model = match &config.model {
        ModelConfig::Gradient => Model::Hopfield(
            GeneralizedHopfield::new(EnergyFunction::QuadraticIdentity, sp)
                .map_err(|e| invalid("model", e.to_string()))?,
        ),
        ModelConfig::Hopfield { j, r, i_ext } => {
            expect_len("J", j.len(), n * n)?;
            expect_len("R", r.len(), n)?;
            expect_len("I_ext", i_ext.len(), n)?;
            let key = |msg: &str| {
                if msg.starts_with("resistance") {
                    "R"
                } else if msg.contains("I_ext") {
                    "I_ext"
                } else {
                    "J"
                }
            };
            let spec = NetworkSpec::new(j.clone(), r.clone(), i_ext.clone()).map_err(|e| {
                let msg = e.to_string();
                invalid(key(&msg), msg)
            })?;
            Model::Hopfield(
                GeneralizedHopfield::new(EnergyFunction::hopfield(spec, potential), sp)
                    .map_err(|e| invalid("model", e.to_string()))?,
            )
        }
        ModelConfig::CohenGrossberg { c, a, b } => {
            expect_len("C", c.len(), n * n)?;
            expect_len("A", a.len(), n)?;
            expect_len("B", b.len(), n)?;
            if a.iter().chain(b).any(|p| p.is_empty()) {
                return Err(invalid("A", "every A and B entry needs at least one coefficient"));
            }
            let poly = |v: &Vec<Vec<f64>>| v.iter().map(|p| CoordinateFn::Polynomial(p.clone())).collect();
            Model::CohenGrossberg(
                CohenGrossbergSpec::new(poly(a), poly(b), c.clone(), potential)
                    .map_err(|e| invalid("C", e.to_string()))?,
            )
        }
    };
    let initial_conditions = match &config.initial_conditions {
        InitialConditions::List(list) => {
            if list.is_empty() {
                return Err(invalid(
                    "initial_conditions",
                    "at least one initial condition is required",
                ));
            }
            for (k, u) in list.iter().enumerate() {
                if u.len() != n {
                    return Err(invalid(
                        "initial_conditions",
                        format!("initial condition {k} has {} entries, expected {n}", u.len()),
                    ));
                }
                if u.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(
                        "initial_conditions",
                        format!("initial condition {k} is not finite"),
                    ));
                }
            }
            list.clone()
        }
        InitialConditions::Random { random } => {
            let seed = seed_override
                .or(random.seed)
                .ok_or_else(|| invalid("random", "random initial conditions need a seed"))?;
            let [lo, hi] = random.bounds;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("box", format!("box must satisfy lo < hi, got [{lo}, {hi}]")));
            }
            if random.count == 0 {
                return Err(invalid("count", "count must be at least 1"));
            }
            let mut rng = StdRng::seed_from_u64(seed);
            (0..random.count)
                .map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect())
                .collect()
        }
    };
    let integrator = IntegratorConfig::from(&config.integrator);
    integrator
        .validate()
        .map_err(|e| invalid("integrator", e.to_string()))?;
    let output_dir = if config.outputs.path.is_absolute() {
        config.outputs.path.clone()
    } else {
        base.join(&config.outputs.path)
    };
    Ok(Experiment {
        config,
        model,
        initial_conditions,
        integrator,
        output_dir,
    })
}
