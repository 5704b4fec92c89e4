//! `hessflow` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical or
//! verification failure.

mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use hessflow::dynamics::{find_steady_state, integrate};
use hessflow::verify::{self, Suite};
use hessflow::{kappa_report, KappaReport, TrajectoryRecord};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use config::{ConfigError, Experiment, Model};

#[derive(Parser)]
#[command(name = "hessflow", version, about = "Hopfield-type flows on Hessian manifolds")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for verification suites; overrides the seed of random initial conditions.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate every initial condition and write one trajectory file each.
    Simulate { config: PathBuf },
    /// Report kappa by all three routes at a set of points.
    Kappa {
        config: PathBuf,
        /// `file:PATH`, `grid:LO:HI:M` or `random:K:SEED`; defaults to the initial conditions.
        #[arg(long)]
        points: Option<PointSource>,
        /// Integrate from each point to its steady state first.
        #[arg(long)]
        at_steady: bool,
    },
    /// Run a seeded property suite and print a pass/fail table.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: hessflow::Error| e.to_string())
}

#[derive(Debug, Clone)]
enum PointSource {
    File(PathBuf),
    Grid { lo: f64, hi: f64, m: usize },
    Random { k: usize, seed: u64 },
}

const RANDOM_BOX: f64 = 3.0;
const MAX_GRID_POINTS: usize = 1_000_000;

impl FromStr for PointSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
        let count = |x: &str| x.parse::<usize>().map_err(|_| format!("`{x}` is not a count"));
        match parts.as_slice() {
            ["file", rest @ ..] if !rest.is_empty() => Ok(PointSource::File(PathBuf::from(rest.join(":")))),
            ["grid", lo, hi, m] => {
                let (lo, hi, m) = (num(lo)?, num(hi)?, count(m)?);
                if !(lo < hi) || m < 2 {
                    return Err("grid needs LO < HI and M >= 2".into());
                }
                Ok(PointSource::Grid { lo, hi, m })
            }
            ["random", k, seed] => Ok(PointSource::Random {
                k: count(k)?,
                seed: seed.parse().map_err(|_| format!("`{seed}` is not a seed"))?,
            }),
            _ => Err(format!(
                "unrecognized point source `{s}` (use file:PATH, grid:LO:HI:M or random:K:SEED)"
            )),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { config } => simulate(config::load(config, cli.seed)?),
        Command::Kappa {
            config,
            points,
            at_steady,
        } => kappa(config::load(config, cli.seed)?, points.as_ref(), *at_steady),
        Command::Verify { suite } => {
            let checks = verify::run(*suite, cli.seed.unwrap_or(0));
            print!("{}", verify::render_table(&checks));
            if verify::all_passed(&checks) {
                Ok(())
            } else {
                Err(CliError::Failure(format!("suite `{suite}` has failing checks")))
            }
        }
    }
}

fn integrate_model(model: &Model, u0: &[f64], exp: &Experiment) -> hessflow::Result<TrajectoryRecord> {
    match model {
        Model::Hopfield(m) => integrate(m, u0, &exp.integrator),
        Model::CohenGrossberg(m) => integrate(m, u0, &exp.integrator),
    }
}

fn output_error(path: &std::path::Path, e: io::Error) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

fn simulate(exp: Experiment) -> Result<(), CliError> {
    let records: Vec<_> = exp
        .initial_conditions
        .par_iter()
        .map(|u0| integrate_model(&exp.model, u0, &exp))
        .collect();
    std::fs::create_dir_all(&exp.output_dir).map_err(|e| output_error(&exp.output_dir, e))?;
    let format = exp.config.outputs.format;
    let mut failures = 0;
    for (k, record) in records.iter().enumerate() {
        let path = exp.output_dir.join(format!("trajectory_{k:04}.{}", format.extension()));
        match record {
            Ok(record) => {
                let mut out = BufWriter::new(File::create(&path).map_err(|e| output_error(&path, e))?);
                output::write_trajectory(&mut out, format, &record.rows)
                    .and_then(|_| out.flush())
                    .map_err(|e| output_error(&path, e))?;
                let term = serde_json::to_string(&record.termination).expect("termination serializes");
                println!("{}: {} rows, termination {term}", path.display(), record.rows.len());
                if record.failed() {
                    failures += 1;
                }
            }
            Err(e) => {
                failures += 1;
                println!("{}: not written: {e}", path.display());
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Failure(format!(
            "{failures} of {} trajectories ended in a numerical failure",
            records.len()
        )));
    }
    Ok(())
}

fn read_points(path: &std::path::Path, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read points {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let point = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if point.len() != n {
            return Err(CliError::Usage(format!(
                "{}:{}: expected {n} coordinates, got {}",
                path.display(),
                i + 1,
                point.len()
            )));
        }
        points.push(point);
    }
    Ok(points)
}

fn grid_points(n: usize, lo: f64, hi: f64, m: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(m).filter(|&t| t <= MAX_GRID_POINTS));
    let total = total.ok_or_else(|| CliError::Usage(format!("grid of {m}^{n} points exceeds {MAX_GRID_POINTS}")))?;
    let axis: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    Ok((0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; n];
            for a in (0..n).rev() {
                p[a] = axis[idx % m];
                idx /= m;
            }
            p
        })
        .collect())
}

fn kappa(exp: Experiment, points: Option<&PointSource>, at_steady: bool) -> Result<(), CliError> {
    let Model::Hopfield(model) = &exp.model else {
        return Err(CliError::Usage(
            "kappa reports need a gradient or hopfield model (the closed form is specific to them)".into(),
        ));
    };
    let n = exp.config.dimension;
    let points = match points {
        None => exp.initial_conditions.clone(),
        Some(PointSource::File(path)) => read_points(path, n)?,
        Some(PointSource::Grid { lo, hi, m }) => grid_points(n, *lo, *hi, *m)?,
        Some(PointSource::Random { k, seed }) => {
            let mut rng = StdRng::seed_from_u64(*seed);
            (0..*k)
                .map(|_| (0..n).map(|_| rng.gen_range(-RANDOM_BOX..RANDOM_BOX)).collect())
                .collect()
        }
    };
    let reports: Vec<Result<KappaReport, String>> = points
        .par_iter()
        .map(|u| {
            let at = if at_steady {
                find_steady_state(model, u, &exp.integrator).map_err(|e| format!("from {u:?}: {e}"))?
            } else {
                u.clone()
            };
            kappa_report(&model.energy, &model.potential, &at).map_err(|e| format!("at {at:?}: {e}"))
        })
        .collect();
    let reports = reports
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Failure)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    output::write_kappa(&mut out, exp.config.outputs.format, &reports)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Usage(format!("cannot write output: {e}")))?;
    let disagreeing = reports.iter().filter(|r| !r.routes_agree()).count();
    if disagreeing > 0 {
        return Err(CliError::Failure(format!(
            "{disagreeing} of {} points exceed the route-agreement tolerance",
            reports.len()
        )));
    }
    Ok(())
}
