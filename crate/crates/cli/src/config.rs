//! Experiment configuration file.
//!
//! Every field has a default, so an empty file describes the standard
//! experiment: ten servers 400 m apart, the five standard applications, and
//! 1500 and 1800 veh/h scenarios of five runs each.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use v2x_placement::evaluation::{LatencyRange, StochasticLatencyModel};
use v2x_placement::mobility::{MobilityParams, TrafficScenario};
use v2x_placement::{
    derive_seed, ApplicationSpec, DelayParameters, LatencyMatrix, PlacementInstance, RelaxationRule, ServiceCatalog,
    ServiceSpec, SolverKind, SolverOptions, Topology,
};

/// Seed tags, so each consumer of the global seed gets its own stream.
const LATENCY_STREAM: u64 = 1;
const TRAFFIC_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub histogram_bins: usize,
    pub solver: SolverConfig,
    pub topology: Topology,
    pub delay: DelayParameters,
    pub latency: LatencyConfig,
    pub mobility: MobilityParams,
    pub services: Vec<ServiceSpec>,
    pub applications: Vec<ApplicationSpec>,
    pub scenarios: Vec<TrafficScenario>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2024,
            output_dir: PathBuf::from("results"),
            histogram_bins: 50,
            solver: SolverConfig::default(),
            topology: Topology::default(),
            delay: DelayParameters::default(),
            latency: LatencyConfig::default(),
            mobility: MobilityParams::default(),
            services: ServiceCatalog::standard().specs(),
            applications: ApplicationSpec::standard_catalog(),
            scenarios: vec![TrafficScenario::moderate(), TrafficScenario::heavy()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Solver used by `place`, `simulate` and `sweep`.
    pub kind: SolverKind,
    /// Strategies compared by `compare`.
    pub strategies: Vec<SolverKind>,
    pub node_budget: u64,
    pub oracle_cap: u64,
    pub relaxation: RelaxationRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let options = SolverOptions::default();
        SolverConfig {
            kind: SolverKind::Rdp,
            strategies: vec![SolverKind::Rdp, SolverKind::Raa],
            node_budget: options.node_budget,
            oracle_cap: options.oracle_cap,
            relaxation: options.relaxation,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { node_budget: self.node_budget, oracle_cap: self.oracle_cap, relaxation: self.relaxation }
    }
}

/// Uniform ranges the simulated latencies are drawn from. Placement uses
/// the midpoint of each range as the expected latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub processing: LatencyRange,
    pub transmission: LatencyRange,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        let model = StochasticLatencyModel::default();
        LatencyConfig { processing: model.processing, transmission: model.transmission }
    }
}

fn midpoint(range: &LatencyRange) -> f64 {
    (range.min + range.max) / 2.0
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub solver: Option<SolverKind>,
    pub scenario: Option<String>,
    pub runs: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(kind) = overrides.solver {
            self.solver.kind = kind;
        }
        if let Some(name) = &overrides.scenario {
            self.scenarios.retain(|s| &s.name == name);
            if self.scenarios.is_empty() {
                bail!("no scenario named {name:?} in the configuration");
            }
        }
        if let Some(runs) = overrides.runs {
            for s in &mut self.scenarios {
                s.runs = runs;
            }
        }
        Ok(())
    }

    /// Checks everything a command may touch.
    pub fn validate(&self) -> Result<()> {
        self.instance()?;
        self.mobility.validate().context("mobility")?;
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be positive");
        }
        if self.solver.strategies.is_empty() {
            bail!("solver.strategies must name at least one strategy");
        }
        let mut names = BTreeSet::new();
        for app in &self.applications {
            if !names.insert(app.name.as_str()) {
                bail!("application {:?} is defined twice", app.name);
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                bail!("scenario {:?} is defined twice", s.name);
            }
        }
        Ok(())
    }

    /// Placement instance with expected latencies.
    pub fn instance(&self) -> Result<PlacementInstance> {
        let servers = self.topology.servers().context("topology")?;
        let services = ServiceCatalog::new(&self.services).context("services")?;
        let latency = LatencyMatrix::uniform(
            servers.len(),
            midpoint(&self.latency.processing),
            midpoint(&self.latency.transmission),
        )
        .context("latency")?;
        Ok(PlacementInstance::new(servers, services, self.applications.clone(), latency, self.delay.clone())?)
    }

    pub fn latency_model(&self) -> StochasticLatencyModel {
        StochasticLatencyModel {
            processing: self.latency.processing,
            transmission: self.latency.transmission,
            seed: derive_seed(self.seed, &[LATENCY_STREAM]),
        }
    }

    /// Scenarios with their traffic seeds tied to the global seed.
    pub fn seeded_scenarios(&self) -> Vec<TrafficScenario> {
        self.scenarios
            .iter()
            .map(|s| TrafficScenario { seed: derive_seed(self.seed, &[TRAFFIC_STREAM, s.seed]), ..s.clone() })
            .collect()
    }
}
