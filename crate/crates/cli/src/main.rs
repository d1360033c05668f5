//! `skyris`: batch front end for single runs, parameter sweeps and
//! scheme/baseline comparisons.

mod artifacts;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use skyris_core::baseline::run_baseline;
use skyris_core::{default_paper_scenario, parse_config, run_algorithm2, IterationTrace, ScenarioConfig, Scheme, SolutionState};

use artifacts::write_all;

#[derive(Parser)]
#[command(name = "skyris", version, about = "Secrecy energy-efficiency optimization for a UAV-mounted RIS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario and write its trace, solution and figures.
    Run(RunArgs),
    /// Re-run the optimization for each value of one parameter.
    Sweep(SweepArgs),
    /// Run both RIS schemes (and the relay baseline) on one scenario.
    Compare(CompareArgs),
    /// Optimize the amplify-and-forward relay baseline only.
    Baseline(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario file (TOML); the built-in default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Recorded in every artifact; the optimization itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// RIS scheme: 1 (trajectory with fixed phases) or 2 (joint trajectory and phases).
    #[arg(long, default_value = "1", value_parser = parse_scheme)]
    scheme: Scheme,
    /// Also optimize the amplify-and-forward relay baseline.
    #[arg(long, value_enum, default_value_t = Baseline::None)]
    baseline: Baseline,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// RIS scheme: 1 (trajectory with fixed phases) or 2 (joint trajectory and phases).
    #[arg(long, default_value = "1", value_parser = parse_scheme)]
    scheme: Scheme,
    /// Also optimize the amplify-and-forward relay baseline.
    #[arg(long, value_enum, default_value_t = Baseline::None)]
    baseline: Baseline,
    /// Parameter to vary.
    #[arg(long, value_enum, ignore_case = true)]
    axis: Axis,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    values: Vec<f64>,
    /// Concurrent sweep points; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = Baseline::Af)]
    baseline: Baseline,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    None,
    Af,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum Axis {
    #[value(name = "H")]
    H,
    #[value(name = "alpha")]
    Alpha,
    #[value(name = "Pk")]
    Pk,
    #[value(name = "M")]
    M,
    #[value(name = "vmax")]
    Vmax,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::H => "H_m",
            Axis::Alpha => "alpha",
            Axis::Pk => "Pk_w",
            Axis::M => "M",
            Axis::Vmax => "vmax_mps",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value {value}"));
        }
        match self {
            Axis::H => cfg.altitude_m = value,
            Axis::Alpha => cfg.pathloss_exponent = value,
            Axis::Pk => cfg.max_power_w = vec![value; cfg.num_users()],
            Axis::Vmax => cfg.v_max_mps = value,
            Axis::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(format!("M must be a positive integer, got {value}"));
                }
                cfg.ris_elements = value as usize;
            }
        }
        cfg.validate().map_err(|e| e.to_string())
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "i" | "one" => Ok(Scheme::One),
        "2" | "ii" | "two" => Ok(Scheme::Two),
        _ => Err(format!("unknown scheme '{s}', expected 1 or 2")),
    }
}

/// Failure reported to stderr as one JSON object.
#[derive(Debug, Serialize)]
pub(crate) struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    pub(crate) fn new(kind: &'static str, message: impl ToString) -> Self {
        Self { kind, message: message.to_string() }
    }
}

/// Which optimizer produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ris(Scheme),
    Relay,
}

impl Model {
    pub fn label(self) -> &'static str {
        match self {
            Model::Ris(Scheme::One) => "ris-scheme-1",
            Model::Ris(Scheme::Two) => "ris-scheme-2",
            Model::Relay => "relay-af",
        }
    }
}

pub struct Outcome {
    pub model: Model,
    pub state: SolutionState,
    pub trace: IterationTrace,
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, Failure> {
    let cfg = match path {
        None => default_paper_scenario(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| Failure::new("config", e))?
        }
    };
    cfg.validate().map_err(|e| Failure::new("config", e))?;
    Ok(cfg)
}

fn optimize(cfg: &ScenarioConfig, model: Model) -> Result<Outcome, Failure> {
    let result = match model {
        Model::Ris(scheme) => run_algorithm2(cfg, scheme),
        Model::Relay => run_baseline(cfg),
    };
    let (state, trace) = result.map_err(|e| Failure::new("solver", e))?;
    Ok(Outcome { model, state, trace })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Failure::new("runtime", e))
}

fn cmd_run(common: &CommonArgs, model: Model) -> Result<(), Failure> {
    let cfg = load_config(&common.config)?;
    let outcome = optimize(&cfg, model)?;
    let files = artifacts::run_artifacts(&cfg, &outcome, common.seed)?;
    write_all(&common.out, &files)
}

#[derive(Serialize)]
struct SweepRow {
    schema_version: u32,
    axis: &'static str,
    value: f64,
    status: String,
    #[serde(rename = "zeta_bit_per_s_hz")]
    zeta: Option<f64>,
    #[serde(rename = "gamma_bit_per_joule_hz")]
    gamma: Option<f64>,
    #[serde(rename = "gamma_baseline_bit_per_joule_hz")]
    gamma_baseline: Option<f64>,
    iterations: Option<usize>,
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = load_config(&args.common.config)?;
    let model = Model::Ris(args.scheme);
    let rows: Vec<SweepRow> = pool(args.jobs)?.install(|| {
        args.values
            .par_iter()
            .map(|&value| {
                let mut row = SweepRow {
                    schema_version: artifacts::SCHEMA_VERSION,
                    axis: args.axis.name(),
                    value,
                    status: "ok".into(),
                    zeta: None,
                    gamma: None,
                    gamma_baseline: None,
                    iterations: None,
                };
                let mut cfg = base.clone();
                if let Err(e) = args.axis.apply(&mut cfg, value) {
                    row.status = format!("invalid: {e}");
                    return row;
                }
                match optimize(&cfg, model) {
                    Ok(o) => {
                        row.zeta = Some(o.state.zeta);
                        row.gamma = Some(o.state.gamma);
                        row.iterations = Some(o.trace.iterations());
                    }
                    Err(e) => {
                        row.status = format!("failed: {}", e.message);
                        return row;
                    }
                }
                if args.baseline == Baseline::Af {
                    match optimize(&cfg, Model::Relay) {
                        Ok(o) => row.gamma_baseline = Some(o.state.gamma),
                        Err(e) => row.status = format!("baseline failed: {}", e.message),
                    }
                }
                row
            })
            .collect()
    });
    let files = artifacts::sweep_artifacts(args.axis.name(), model, &rows)?;
    write_all(&args.common.out, &files)
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common.config)?;
    let mut models = vec![Model::Ris(Scheme::One), Model::Ris(Scheme::Two)];
    if args.baseline == Baseline::Af {
        models.push(Model::Relay);
    }
    let outcomes: Vec<Outcome> = pool(args.jobs)?.install(|| models.par_iter().map(|&m| optimize(&cfg, m)).collect::<Result<_, _>>())?;
    let files = artifacts::compare_artifacts(&cfg, &outcomes, args.common.seed)?;
    write_all(&args.common.out, &files)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let model = if args.baseline == Baseline::Af { Model::Relay } else { Model::Ris(args.scheme) };
            cmd_run(&args.common, model)
        }
        Command::Baseline(common) => cmd_run(&common, Model::Relay),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Compare(args) => cmd_compare(&args),
    }
}

fn report(failure: &Failure) {
    let body = serde_json::json!({ "error": failure });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&Failure::new("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            report(&failure);
            ExitCode::FAILURE
        }
    }
}
