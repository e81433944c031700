//! Traffic-driven evaluation of placements.
//!
//! For every snapshot of every run, each vehicle issues one request per
//! application. Latencies are drawn per request: one LDM processing draw on
//! the serving server (inflated by the neighbor-count penalty) and one
//! transmission draw from the serving server to every other server. The
//! same draws serve all applications of that vehicle at that instant, and
//! the draw stream does not depend on the placement, so strategies and
//! applications are compared on paired samples.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SolveError};
use crate::mobility::{simulate_traffic, MobilityParams, TrafficScenario, ZoneMap};
use crate::model::{application_delay_from_row, density_adjusted_processing, ApplicationSpec, Placement};
use crate::rng::derive_seed;
use crate::solver::{solve, PlacementInstance, SolveResult, SolverKind, SolverOptions};

/// Closed interval of milliseconds a latency is drawn from uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyRange {
    pub min: f64,
    pub max: f64,
}

impl LatencyRange {
    pub fn new(min: f64, max: f64) -> Self {
        LatencyRange { min, max }
    }

    fn sampler(&self) -> Result<Uniform<f64>, ModelError> {
        if !(self.min > 0.0 && self.min <= self.max && self.max.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "latency range [{}, {}] must satisfy 0 < min <= max",
                self.min, self.max
            )));
        }
        Uniform::new_inclusive(self.min, self.max).map_err(|e| ModelError::InvalidParameter(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticLatencyModel {
    pub processing: LatencyRange,
    pub transmission: LatencyRange,
    pub seed: u64,
}

impl Default for StochasticLatencyModel {
    fn default() -> Self {
        StochasticLatencyModel {
            processing: LatencyRange::new(3.0, 5.0),
            transmission: LatencyRange::new(1.0, 5.0),
            seed: 0,
        }
    }
}

impl StochasticLatencyModel {
    fn run_seed(&self, scenario: &TrafficScenario, run: usize) -> u64 {
        derive_seed(self.seed, &[0x6c61_7465, scenario.seed, run as u64])
    }
}

/// One application request of one vehicle at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySample {
    pub run: usize,
    pub timestamp: f64,
    pub vehicle: u64,
    pub application: Arc<str>,
    /// milliseconds
    pub delay: f64,
    pub server: usize,
    pub nc: usize,
}

/// Traffic bookkeeping of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub run: usize,
    pub scheduled_arrivals: usize,
    pub entered: usize,
    pub exited: usize,
    pub snapshots: usize,
    pub min_same_lane_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub samples: Vec<DelaySample>,
    pub runs: Vec<RunStats>,
}

/// Simulates every run of `scenario` against `placement`.
pub fn run_simulation(
    placement: &Placement,
    scenario: &TrafficScenario,
    model: &StochasticLatencyModel,
    instance: &PlacementInstance<f64>,
    mobility: &MobilityParams,
) -> Result<SimulationOutput, ModelError> {
    scenario.validate()?;
    if placement.len() != instance.servers.len() {
        return Err(ModelError::InvalidParameter(format!(
            "placement has {} servers, topology has {}",
            placement.len(),
            instance.servers.len()
        )));
    }
    if let Some(missing) = instance.required_kinds().iter().find(|&k| !placement.placed_kinds().contains(k)) {
        return Err(ModelError::NoHost(missing));
    }
    let zones = ZoneMap::from_servers(&instance.servers)?;
    let processing = model.processing.sampler()?;
    let transmission = model.transmission.sampler()?;
    let names: Vec<Arc<str>> = instance.applications.iter().map(|a| Arc::from(a.name.as_str())).collect();

    let per_run: Vec<Result<(Vec<DelaySample>, RunStats), ModelError>> = (0..scenario.runs)
        .into_par_iter()
        .map(|run| {
            let traffic = simulate_traffic(scenario, mobility, &zones, run)?;
            let mut rng = ChaCha8Rng::seed_from_u64(model.run_seed(scenario, run));
            let n = instance.servers.len();
            let mut row = vec![0.0; n];
            let mut samples = Vec::new();
            for frame in &traffic.frames {
                for v in &frame.vehicles {
                    let base = processing.sample(&mut rng);
                    let proc = density_adjusted_processing(base, v.neighbor_count, &instance.params);
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot = if j == v.serving_server { proc } else { proc + transmission.sample(&mut rng) };
                    }
                    for (app, name) in instance.applications.iter().zip(&names) {
                        let delay = application_delay_from_row(placement, &row, app, &instance.params)?;
                        samples.push(DelaySample {
                            run,
                            timestamp: frame.time,
                            vehicle: v.vehicle,
                            application: name.clone(),
                            delay,
                            server: v.serving_server,
                            nc: v.neighbor_count,
                        });
                    }
                }
            }
            let stats = RunStats {
                run,
                scheduled_arrivals: traffic.scheduled_arrivals,
                entered: traffic.entered,
                exited: traffic.exited,
                snapshots: traffic.frames.len(),
                min_same_lane_gap: traffic.min_same_lane_gap,
            };
            Ok((samples, stats))
        })
        .collect();

    let mut out = SimulationOutput { samples: Vec::new(), runs: Vec::with_capacity(scenario.runs) };
    for r in per_run {
        let (samples, stats) = r?;
        out.samples.extend(samples);
        out.runs.push(stats);
    }
    Ok(out)
}

/// Normalized histogram: `densities[i]` over `[edges[i], edges[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max]` of `sorted`. A zero-width range
    /// becomes a single unit-width bin centered on the value.
    fn from_sorted(sorted: &[f64], bins: usize) -> Self {
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let n = sorted.len() as f64;
        if hi <= lo || bins == 0 {
            return Histogram { edges: vec![lo - 0.5, lo + 0.5], densities: vec![1.0] };
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        let mut counts = vec![0usize; bins];
        for &x in sorted {
            let i = (((x - lo) / width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        let densities = counts.iter().zip(edges.windows(2)).map(|(&c, e)| c as f64 / (n * (e[1] - e[0]))).collect();
        Histogram { edges, densities }
    }

    pub fn integral(&self) -> f64 {
        self.densities.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSummary {
    pub application: String,
    pub threshold: f64,
    pub reliability: f64,
    pub samples: usize,
    /// Mean of all pooled samples.
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of samples strictly above the threshold.
    pub violation_rate: f64,
    pub per_run_means: Vec<f64>,
    /// Mean of `per_run_means`, each run weighted equally.
    pub cross_run_mean: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub applications: Vec<AppSummary>,
    /// Applications without any sample.
    pub empty: Vec<String>,
}

impl SummaryReport {
    pub fn get(&self, application: &str) -> Option<&AppSummary> {
        self.applications.iter().find(|a| a.application == application)
    }
}

fn sorted_mean(sorted: &[f64]) -> f64 {
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Per-application statistics. Values are sorted before any summation, so
/// the report does not depend on the order of `samples`.
pub fn summarize(samples: &[DelaySample], apps: &[ApplicationSpec<f64>], bins: usize) -> SummaryReport {
    let mut by_app: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for s in samples {
        by_app.entry(&s.application).or_default().entry(s.run).or_default().push(s.delay);
    }

    let mut report = SummaryReport { applications: Vec::new(), empty: Vec::new() };
    for app in apps {
        let Some(runs) = by_app.get_mut(app.name.as_str()) else {
            report.empty.push(app.name.clone());
            continue;
        };
        let mut per_run_means = Vec::with_capacity(runs.len());
        let mut pooled = Vec::new();
        for values in runs.values_mut() {
            values.sort_by(f64::total_cmp);
            per_run_means.push(sorted_mean(values));
            pooled.extend_from_slice(values);
        }
        pooled.sort_by(f64::total_cmp);
        let violations = pooled.iter().filter(|&&d| d > app.delay_threshold).count();
        let mut run_means_sorted = per_run_means.clone();
        run_means_sorted.sort_by(f64::total_cmp);
        report.applications.push(AppSummary {
            application: app.name.clone(),
            threshold: app.delay_threshold,
            reliability: app.reliability,
            samples: pooled.len(),
            mean: sorted_mean(&pooled),
            min: pooled[0],
            max: pooled[pooled.len() - 1],
            violation_rate: violations as f64 / pooled.len() as f64,
            per_run_means,
            cross_run_mean: sorted_mean(&run_means_sorted),
            histogram: Histogram::from_sorted(&pooled, bins),
        });
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: SolverKind,
    pub solve: SolveResult<f64>,
    /// `None` when the strategy found no feasible placement.
    pub summary: Option<SummaryReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub outcomes: Vec<StrategyOutcome>,
}

/// Everything needed to simulate a placement, apart from the placement.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationSetup<'a> {
    pub instance: &'a PlacementInstance<f64>,
    pub model: &'a StochasticLatencyModel,
    pub mobility: &'a MobilityParams,
    pub solver: &'a SolverOptions,
    pub bins: usize,
}

/// Solves with every strategy, then simulates each placement on the same
/// traffic and the same latency draws.
pub fn compare_strategies(
    strategies: &[SolverKind],
    scenario: &TrafficScenario,
    setup: &EvaluationSetup<'_>,
) -> Result<ComparisonReport, SolveError> {
    let mut outcomes = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let solved = solve(strategy, setup.instance, setup.solver)?;
        let summary = match &solved.placement {
            Some(placement) => {
                let sim = run_simulation(placement, scenario, setup.model, setup.instance, setup.mobility)?;
                Some(summarize(&sim.samples, &setup.instance.applications, setup.bins))
            }
            None => None,
        };
        outcomes.push(StrategyOutcome { strategy, solve: solved, summary });
    }
    Ok(ComparisonReport { scenario: scenario.name.clone(), outcomes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub arrival_rate: f64,
    pub summary: SummaryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeChange {
    pub application: String,
    pub from_mean: f64,
    pub to_mean: f64,
    /// `(to - from) / from`
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStep {
    pub from: String,
    pub to: String,
    pub changes: Vec<RelativeChange>,
    /// Application with the largest relative change.
    pub largest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub strategy: SolverKind,
    pub placement: Placement,
    pub scenarios: Vec<ScenarioSummary>,
    pub steps: Vec<SweepStep>,
}

/// Solves once with `strategy` and evaluates the placement at each density,
/// reporting the relative change of every application's cross-run mean
/// between consecutive scenarios.
pub fn density_sweep(
    scenarios: &[TrafficScenario],
    strategy: SolverKind,
    setup: &EvaluationSetup<'_>,
) -> Result<SweepReport, SolveError> {
    if scenarios.len() < 2 {
        return Err(ModelError::InvalidParameter("a density sweep needs at least two scenarios".into()).into());
    }
    let solved = solve(strategy, setup.instance, setup.solver)?;
    let placement = solved
        .placement
        .ok_or_else(|| ModelError::InvalidParameter(format!("{strategy} found no feasible placement")))?;

    let mut summaries = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let sim = run_simulation(&placement, scenario, setup.model, setup.instance, setup.mobility)?;
        summaries.push(ScenarioSummary {
            scenario: scenario.name.clone(),
            arrival_rate: scenario.arrival_rate,
            summary: summarize(&sim.samples, &setup.instance.applications, setup.bins),
        });
    }

    let steps = summaries.windows(2).map(|w| relative_changes(&w[0], &w[1])).collect();
    Ok(SweepReport { strategy, placement, scenarios: summaries, steps })
}

fn relative_changes(from: &ScenarioSummary, to: &ScenarioSummary) -> SweepStep {
    let changes: Vec<RelativeChange> = from
        .summary
        .applications
        .iter()
        .filter_map(|a| {
            let b = to.summary.get(&a.application)?;
            Some(RelativeChange {
                application: a.application.clone(),
                from_mean: a.cross_run_mean,
                to_mean: b.cross_run_mean,
                change: (b.cross_run_mean - a.cross_run_mean) / a.cross_run_mean,
            })
        })
        .collect();
    let largest = changes
        .iter()
        .fold(None::<&RelativeChange>, |best, c| match best {
            Some(b) if b.change >= c.change => Some(b),
            _ => Some(c),
        })
        .map(|c| c.application.clone());
    SweepStep { from: from.scenario.clone(), to: to.scenario.clone(), changes, largest }
}

pub const SAMPLES_CSV_HEADER: &str = "run,timestamp,vehicle,app,delay_ms,server,nc";

pub fn write_samples_csv<W: Write>(mut out: W, samples: &[DelaySample]) -> io::Result<()> {
    writeln!(out, "{SAMPLES_CSV_HEADER}")?;
    for s in samples {
        writeln!(out, "{},{},{},{},{},{},{}", s.run, s.timestamp, s.vehicle, s.application, s.delay, s.server, s.nc)?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(mut out: W, histogram: &Histogram) -> io::Result<()> {
    writeln!(out, "bin_left,bin_right,density")?;
    for (d, e) in histogram.densities.iter().zip(histogram.edges.windows(2)) {
        writeln!(out, "{},{},{}", e[0], e[1], d)?;
    }
    Ok(())
}
