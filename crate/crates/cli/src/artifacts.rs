//! Rendering and writing of run, sweep and comparison artifacts.
//!
//! Everything is rendered in memory first and written through temporary
//! files, so a failed command leaves no partial set of outputs behind.

use std::fs;
use std::path::Path;

use serde::Serialize;
use skyris_core::{initial_trajectory, Point, ScenarioConfig};

use crate::svg::{line_plot, trajectory_map};
use crate::{Failure, Model, Outcome, SweepRow};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

#[derive(Serialize)]
struct Units {
    trajectory: &'static str,
    phases: &'static str,
    power: &'static str,
    zeta: &'static str,
    gamma: &'static str,
}

const UNITS: Units = Units { trajectory: "m", phases: "rad", power: "W", zeta: "bit/s/Hz", gamma: "bit/J/Hz" };

#[derive(Serialize)]
struct SolutionFile<'a> {
    schema_version: u32,
    model: &'static str,
    seed: u64,
    units: Units,
    zeta: f64,
    gamma: f64,
    iterations: usize,
    converged: bool,
    trajectory: &'a [Point],
    phases: &'a [Vec<f64>],
    association: &'a [Vec<f64>],
    power: &'a [Vec<f64>],
    scenario_toml: String,
}

fn io(e: impl ToString) -> Failure {
    Failure::new("io", e)
}

fn status(s: impl Serialize) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

pub fn trace_csv(outcome: &Outcome) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "schema_version",
        "iteration",
        "gamma_bit_per_joule_hz",
        "zeta_bit_per_s_hz",
        "zeta_bound_bit_per_s_hz",
        "association_status",
        "dinkelbach_iterations",
        "power_inner_iterations",
        "power_status",
        "trajectory_iterations",
        "trajectory_status",
        "reverted",
        "wall_time_s",
    ])
    .map_err(io)?;
    for r in &outcome.trace.rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.iteration.to_string(),
            format!("{:e}", r.gamma),
            format!("{:e}", r.zeta),
            format!("{:e}", r.zeta_bound),
            status(r.association_status),
            r.dinkelbach_iterations.to_string(),
            r.power_inner_iterations.to_string(),
            status(r.power_status),
            r.trajectory_iterations.to_string(),
            status(r.trajectory_status),
            status(r.reverted),
            format!("{:.6}", r.wall_time_s),
        ])
        .map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(io)?).map_err(io)
}

fn solution_json(cfg: &ScenarioConfig, outcome: &Outcome, seed: u64) -> Result<String, Failure> {
    let s = &outcome.state;
    let file = SolutionFile {
        schema_version: SCHEMA_VERSION,
        model: outcome.model.label(),
        seed,
        units: UNITS,
        zeta: s.zeta,
        gamma: s.gamma,
        iterations: outcome.trace.iterations(),
        converged: outcome.trace.converged,
        trajectory: &s.trajectory.points,
        phases: &s.phases.slots,
        association: &s.allocation.assoc,
        power: &s.allocation.power,
        scenario_toml: cfg.to_toml_string(),
    };
    serde_json::to_string_pretty(&file).map(|t| t + "\n").map_err(io)
}

fn convergence_series(outcome: &Outcome) -> (String, Vec<(f64, f64)>) {
    let pts = outcome.trace.rows.iter().map(|r| (r.iteration as f64, r.gamma)).collect();
    (outcome.model.label().to_string(), pts)
}

pub fn run_artifacts(cfg: &ScenarioConfig, outcome: &Outcome, seed: u64) -> Result<Vec<Artifact>, Failure> {
    let s = &outcome.state;
    let silent: Vec<usize> = (0..cfg.num_slots).filter(|&n| s.allocation.is_silent(n)).collect();
    Ok(vec![
        artifact("trace.csv", trace_csv(outcome)?),
        artifact("solution.json", solution_json(cfg, outcome, seed)?),
        artifact("trajectory.svg", trajectory_map(cfg, &initial_trajectory(cfg), &s.trajectory, &silent)),
        artifact(
            "convergence.svg",
            line_plot("Secrecy energy efficiency per iteration", "iteration", "Γ (bit/J/Hz)", &[convergence_series(outcome)]),
        ),
    ])
}

pub fn sweep_artifacts(axis: &str, model: Model, rows: &[SweepRow]) -> Result<Vec<Artifact>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    let table = String::from_utf8(w.into_inner().map_err(io)?).map_err(io)?;
    let mut series = vec![(model.label().to_string(), rows.iter().filter_map(|r| Some((r.value, r.gamma?))).collect())];
    let baseline: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.value, r.gamma_baseline?))).collect();
    if !baseline.is_empty() {
        series.push((Model::Relay.label().to_string(), baseline));
    }
    let plot = line_plot(&format!("Secrecy energy efficiency versus {axis}"), axis, "Γ (bit/J/Hz)", &series);
    Ok(vec![artifact("sweep.csv", table), artifact("sweep.svg", plot)])
}

pub fn compare_artifacts(cfg: &ScenarioConfig, outcomes: &[Outcome], seed: u64) -> Result<Vec<Artifact>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["schema_version", "model", "zeta_bit_per_s_hz", "gamma_bit_per_joule_hz", "iterations", "converged"])
        .map_err(io)?;
    let mut files = Vec::new();
    for o in outcomes {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            o.model.label().to_string(),
            format!("{:e}", o.state.zeta),
            format!("{:e}", o.state.gamma),
            o.trace.iterations().to_string(),
            o.trace.converged.to_string(),
        ])
        .map_err(io)?;
        files.push(artifact(format!("trace_{}.csv", o.model.label()), trace_csv(o)?));
        files.push(artifact(format!("solution_{}.json", o.model.label()), solution_json(cfg, o, seed)?));
    }
    files.push(artifact("compare.csv", String::from_utf8(w.into_inner().map_err(io)?).map_err(io)?));
    // The relay Γ is orders of magnitude apart, so only the RIS schemes share a plot.
    let series: Vec<_> = outcomes.iter().filter(|o| o.model != Model::Relay).map(convergence_series).collect();
    files.push(artifact(
        "convergence.svg",
        line_plot("Secrecy energy efficiency per iteration", "iteration", "Γ (bit/J/Hz)", &series),
    ));
    Ok(files)
}

/// Writes every artifact to a temporary name first, then renames them into
/// place; on any error the temporaries are removed.
pub fn write_all(dir: &Path, files: &[Artifact]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io(format!("{}: {e}", dir.display())))?;
    let tmp = |a: &Artifact| dir.join(format!(".{}.partial", a.name));
    let cleanup = || {
        for a in files {
            let _ = fs::remove_file(tmp(a));
        }
    };
    for a in files {
        if let Err(e) = fs::write(tmp(a), &a.contents) {
            cleanup();
            return Err(io(format!("{}: {e}", tmp(a).display())));
        }
    }
    for a in files {
        if let Err(e) = fs::rename(tmp(a), dir.join(&a.name)) {
            cleanup();
            return Err(io(format!("{}: {e}", a.name)));
        }
    }
    Ok(())
}
