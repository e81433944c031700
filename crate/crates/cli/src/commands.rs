//! Subcommand implementations. Each returns whether its result was feasible.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use v2x_placement::evaluation::{
    compare_strategies, density_sweep, run_simulation, summarize, write_histogram_csv, write_samples_csv,
    EvaluationSetup, RunStats, SummaryReport,
};
use v2x_placement::model::check_constraints_with;
use v2x_placement::solver::solve;
use v2x_placement::{ConstraintReport, Placement, PlacementInstance, SolveResult};

use crate::config::ExperimentConfig;

/// Outcome of a command, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Infeasible,
}

pub const PLACEMENT_FILE: &str = "placement.json";

/// Contents of the placement file. Index `i` of `placement` is the service
/// hosted on server `i`.
#[derive(Debug, Serialize)]
struct PlacementArtifact<'a> {
    feasible: bool,
    #[serde(flatten)]
    result: &'a SolveResult,
    /// Checked against the enforced thresholds.
    constraints: Option<ConstraintReport>,
}

/// The part of a placement file needed to simulate it.
#[derive(Debug, Deserialize)]
struct PlacementInput {
    placement: Option<Placement>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_histograms(dir: &Path, summary: &SummaryReport) -> Result<()> {
    for app in &summary.applications {
        let path = dir.join(format!("histogram_{}.csv", app.application));
        let mut out = create(&path)?;
        write_histogram_csv(&mut out, &app.histogram)?;
        out.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn solve_configured(cfg: &ExperimentConfig, instance: &PlacementInstance) -> Result<SolveResult> {
    let kind = cfg.solver.kind;
    solve(kind, instance, &cfg.solver.options()).with_context(|| format!("running the {kind} solver"))
}

pub fn place(cfg: &ExperimentConfig) -> Result<Outcome> {
    let instance = cfg.instance()?;
    let result = solve_configured(cfg, &instance)?;
    let constraints =
        result.placement.as_ref().map(|p| check_constraints_with(p, &instance, &result.enforced_thresholds));
    let path = cfg.output_dir.join(PLACEMENT_FILE);
    write_json(&path, &PlacementArtifact { feasible: result.is_feasible(), result: &result, constraints })?;

    match (&result.placement, result.objective) {
        (Some(p), Some(objective)) => {
            let relaxed = if result.relaxed { " (relaxed thresholds)" } else { "" };
            println!("{}: {p} objective {objective}{relaxed}", result.solver);
            println!("wrote {}", path.display());
            Ok(Outcome::Done)
        }
        _ => {
            println!("{}: infeasible", result.solver);
            println!("wrote {}", path.display());
            Ok(Outcome::Infeasible)
        }
    }
}

pub fn read_placement(path: &Path, instance: &PlacementInstance) -> Result<Option<Placement>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let input: PlacementInput = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(p) = &input.placement {
        if p.len() != instance.servers.len() {
            bail!("{} assigns {} servers but the topology has {}", path.display(), p.len(), instance.servers.len());
        }
    }
    Ok(input.placement)
}

#[derive(Debug, Serialize)]
struct ScenarioReport<'a> {
    scenario: &'a str,
    arrival_rate: f64,
    placement: &'a Placement,
    runs: &'a [RunStats],
    #[serde(flatten)]
    summary: &'a SummaryReport,
}

pub fn simulate(cfg: &ExperimentConfig, placement_file: Option<&PathBuf>) -> Result<Outcome> {
    let instance = cfg.instance()?;
    let placement = match placement_file {
        Some(path) => read_placement(path, &instance)?,
        None => solve_configured(cfg, &instance)?.placement,
    };
    let Some(placement) = placement else {
        println!("no feasible placement to simulate");
        return Ok(Outcome::Infeasible);
    };

    let model = cfg.latency_model();
    for scenario in cfg.seeded_scenarios() {
        let out = run_simulation(&placement, &scenario, &model, &instance, &cfg.mobility)
            .with_context(|| format!("simulating scenario {}", scenario.name))?;
        let summary = summarize(&out.samples, &instance.applications, cfg.histogram_bins);

        let dir = cfg.output_dir.join(&scenario.name);
        let samples_path = dir.join("samples.csv");
        let mut samples = create(&samples_path)?;
        write_samples_csv(&mut samples, &out.samples)?;
        samples.flush().with_context(|| format!("writing {}", samples_path.display()))?;
        let report = ScenarioReport {
            scenario: &scenario.name,
            arrival_rate: scenario.arrival_rate,
            placement: &placement,
            runs: &out.runs,
            summary: &summary,
        };
        write_json(&dir.join("summary.json"), &report)?;
        write_histograms(&dir, &summary)?;

        println!(
            "{} ({} veh/h, {} runs): {} samples",
            scenario.name,
            scenario.arrival_rate,
            scenario.runs,
            out.samples.len()
        );
        for app in &summary.applications {
            println!(
                "  {:<5} mean {:>8.3} ms  violation {:>6.2}%  (threshold {} ms)",
                app.application,
                app.cross_run_mean,
                100.0 * app.violation_rate,
                app.threshold
            );
        }
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(Outcome::Done)
}

pub fn compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let instance = cfg.instance()?;
    let model = cfg.latency_model();
    let options = cfg.solver.options();
    let setup = EvaluationSetup {
        instance: &instance,
        model: &model,
        mobility: &cfg.mobility,
        solver: &options,
        bins: cfg.histogram_bins,
    };
    for scenario in cfg.seeded_scenarios() {
        let report = compare_strategies(&cfg.solver.strategies, &scenario, &setup)
            .with_context(|| format!("comparing strategies on scenario {}", scenario.name))?;
        let dir = cfg.output_dir.join(&scenario.name);
        write_json(&dir.join("comparison.json"), &report)?;

        println!("{} ({} veh/h)", scenario.name, scenario.arrival_rate);
        for outcome in &report.outcomes {
            match (&outcome.solve.placement, &outcome.summary) {
                (Some(p), Some(summary)) => {
                    write_histograms(&dir.join(outcome.strategy.name()), summary)?;
                    let violations: Vec<String> = summary
                        .applications
                        .iter()
                        .map(|a| format!("{} {:.2}%", a.application, 100.0 * a.violation_rate))
                        .collect();
                    println!("  {:<6} {p}  violations: {}", outcome.strategy.name(), violations.join(", "));
                }
                _ => println!("  {:<6} infeasible", outcome.strategy.name()),
            }
        }
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(Outcome::Done)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let instance = cfg.instance()?;
    if !solve_configured(cfg, &instance)?.is_feasible() {
        println!("{}: infeasible", cfg.solver.kind);
        return Ok(Outcome::Infeasible);
    }
    let model = cfg.latency_model();
    let options = cfg.solver.options();
    let setup = EvaluationSetup {
        instance: &instance,
        model: &model,
        mobility: &cfg.mobility,
        solver: &options,
        bins: cfg.histogram_bins,
    };
    let report = density_sweep(&cfg.seeded_scenarios(), cfg.solver.kind, &setup)?;
    let path = cfg.output_dir.join("sweep.json");
    write_json(&path, &report)?;

    println!("{}: {}", report.strategy, report.placement);
    for step in &report.steps {
        let changes: Vec<String> =
            step.changes.iter().map(|c| format!("{} {:+.3}%", c.application, 100.0 * c.change)).collect();
        println!("  {} -> {}: {}", step.from, step.to, changes.join(", "));
    }
    println!("wrote {}", path.display());
    Ok(Outcome::Done)
}

/// Writes the fully expanded default configuration to `path`, or to
/// standard output.
pub fn config_init(path: Option<&Path>) -> Result<Outcome> {
    let text = ExperimentConfig::default().to_toml()?;
    match path {
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(text.as_bytes())?;
            out.flush().with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(Outcome::Done)
}
