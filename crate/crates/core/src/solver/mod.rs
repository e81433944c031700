//! Placement solvers.
//!
//! * [`solve_exact`]: branch-and-bound global minimizer of the summed
//!   application delay under the delay, resource, one-service-per-server
//!   and coverage constraints.
//! * [`solve_rdp`]: exact solve, retried with reliability-relaxed delay
//!   thresholds when the strict problem is infeasible.
//! * [`solve_raa`]: resource-utilization maximizing baseline that ignores
//!   delay thresholds.
//! * [`brute_force_oracle`]: exhaustive enumeration, for verification.

mod exact;
mod oracle;
mod raa;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SolveError};
use crate::model::{
    application_delay, ApplicationSpec, DelayParameters, EdgeServer, LatencyMatrix, Placement, ServiceCatalog,
    ServiceSet, Topology,
};
use crate::scalar::Scalar;

pub use exact::solve_exact;
pub use oracle::brute_force_oracle;
pub use raa::{solve_raa, utilization};

/// Processing latency assumed at placement time (midpoint of 3..5 ms).
pub const EXPECTED_PROCESSING_MS: f64 = 4.0;
/// Transmission latency assumed at placement time (midpoint of 1..5 ms).
pub const EXPECTED_TRANSMISSION_MS: f64 = 3.0;

/// Everything a solver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementInstance<T> {
    pub servers: Vec<EdgeServer<T>>,
    pub services: ServiceCatalog<T>,
    pub applications: Vec<ApplicationSpec<T>>,
    pub latency: LatencyMatrix<T>,
    pub params: DelayParameters<T>,
    /// Serving server of each reference vehicle; one per coverage zone by default.
    pub evaluation_zones: Vec<usize>,
}

impl<T: Scalar> PlacementInstance<T> {
    pub fn new(
        servers: Vec<EdgeServer<T>>,
        services: ServiceCatalog<T>,
        applications: Vec<ApplicationSpec<T>>,
        latency: LatencyMatrix<T>,
        params: DelayParameters<T>,
    ) -> Result<Self, ModelError> {
        let evaluation_zones = (0..servers.len()).collect();
        let instance = PlacementInstance { servers, services, applications, latency, params, evaluation_zones };
        instance.validate()?;
        Ok(instance)
    }

    /// Standard service and application catalogs on `topology`, with
    /// expected processing and transmission latencies.
    pub fn standard(topology: &Topology<T>) -> Result<Self, ModelError> {
        let servers = topology.servers()?;
        let latency =
            LatencyMatrix::uniform(servers.len(), T::of(EXPECTED_PROCESSING_MS), T::of(EXPECTED_TRANSMISSION_MS))?;
        Self::new(
            servers,
            ServiceCatalog::standard(),
            ApplicationSpec::standard_catalog(),
            latency,
            DelayParameters::default(),
        )
    }

    pub fn with_evaluation_zones(mut self, zones: Vec<usize>) -> Result<Self, ModelError> {
        self.evaluation_zones = zones;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.servers.len();
        if n == 0 {
            return Err(ModelError::InvalidParameter("instance has no servers".into()));
        }
        for (i, s) in self.servers.iter().enumerate() {
            if s.id != i {
                return Err(ModelError::InvalidParameter(format!("server at index {i} has id {}", s.id)));
            }
        }
        if self.latency.size() != n {
            return Err(ModelError::InvalidLatency(format!(
                "matrix is {0}x{0} but there are {n} servers",
                self.latency.size()
            )));
        }
        if self.required_kinds().len() > n {
            return Err(ModelError::InvalidParameter(format!(
                "{} distinct services required but only {n} servers",
                self.required_kinds().len()
            )));
        }
        for app in &self.applications {
            app.validate()?;
        }
        self.params.validate()?;
        if let Some(&z) = self.evaluation_zones.iter().find(|&&z| z >= n) {
            return Err(ModelError::ServerOutOfRange { index: z, count: n });
        }
        Ok(())
    }

    /// Union of the services required by any application.
    pub fn required_kinds(&self) -> ServiceSet {
        self.applications.iter().fold(ServiceSet::EMPTY, |set, a| set.union(a.required_services))
    }

    /// The applications' own delay thresholds.
    pub fn thresholds(&self) -> Vec<T> {
        self.applications.iter().map(|a| a.delay_threshold).collect()
    }

    pub fn relaxed_thresholds(&self, rule: RelaxationRule) -> Vec<T> {
        self.applications.iter().map(|a| rule.relax(a.delay_threshold, a.reliability)).collect()
    }
}

/// Summed application delay over every evaluation zone and application.
pub fn objective<T: Scalar>(placement: &Placement, instance: &PlacementInstance<T>) -> Result<T, ModelError> {
    let mut total = T::zero();
    for &zone in &instance.evaluation_zones {
        for app in &instance.applications {
            total = total + application_delay(placement, &instance.latency, zone, app, &instance.params)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Rdp,
    Raa,
    Oracle,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Rdp => "rdp",
            SolverKind::Raa => "raa",
            SolverKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverKind::Exact),
            "rdp" => Ok(SolverKind::Rdp),
            "raa" => Ok(SolverKind::Raa),
            "oracle" => Ok(SolverKind::Oracle),
            other => Err(format!("unknown solver `{other}` (expected exact, rdp, raa or oracle)")),
        }
    }
}

/// How RDP loosens a delay threshold given the application's reliability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationRule {
    /// `threshold / (reliability / 100)`.
    #[default]
    ReliabilityScaled,
    /// `threshold * (1 + (100 - reliability) / 100)`.
    ReliabilityMargin,
}

impl RelaxationRule {
    pub fn relax<T: Scalar>(self, threshold: T, reliability: T) -> T {
        let hundred = T::of(100.0);
        match self {
            RelaxationRule::ReliabilityScaled => threshold / (reliability / hundred),
            RelaxationRule::ReliabilityMargin => threshold * (T::one() + (hundred - reliability) / hundred),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Upper bound on branch-and-bound nodes before giving up.
    pub node_budget: u64,
    /// Upper bound on the number of assignments the oracle may enumerate.
    pub oracle_cap: u64,
    pub relaxation: RelaxationRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { node_budget: 50_000_000, oracle_cap: 10_000_000, relaxation: RelaxationRule::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult<T> {
    pub solver: SolverKind,
    /// `None` when no assignment satisfies the constraints.
    pub placement: Option<Placement>,
    pub objective: Option<T>,
    /// Per-application delay threshold that was enforced.
    pub enforced_thresholds: Vec<T>,
    pub relaxed: bool,
    pub nodes_explored: u64,
}

impl<T: Scalar> SolveResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.placement.is_some()
    }

    pub(crate) fn found(
        solver: SolverKind,
        instance: &PlacementInstance<T>,
        placement: Option<Placement>,
        enforced_thresholds: Vec<T>,
        nodes_explored: u64,
    ) -> Result<Self, SolveError> {
        let objective = placement.as_ref().map(|p| objective(p, instance)).transpose()?;
        Ok(SolveResult { solver, placement, objective, enforced_thresholds, relaxed: false, nodes_explored })
    }
}

pub(crate) fn check_arity<T>(instance: &PlacementInstance<T>, thresholds: &[T]) -> Result<(), SolveError> {
    if thresholds.len() != instance.applications.len() {
        return Err(SolveError::ThresholdArity { expected: instance.applications.len(), got: thresholds.len() });
    }
    Ok(())
}

/// Exact solve under the applications' thresholds; if that is infeasible,
/// a second exact solve under thresholds relaxed by `options.relaxation`.
pub fn solve_rdp<T: Scalar>(
    instance: &PlacementInstance<T>,
    options: &SolverOptions,
) -> Result<SolveResult<T>, SolveError> {
    let strict = solve_exact(instance, &instance.thresholds(), options)?;
    if strict.is_feasible() {
        return Ok(SolveResult { solver: SolverKind::Rdp, ..strict });
    }
    let relaxed = solve_exact(instance, &instance.relaxed_thresholds(options.relaxation), options)?;
    Ok(SolveResult {
        solver: SolverKind::Rdp,
        relaxed: true,
        nodes_explored: strict.nodes_explored + relaxed.nodes_explored,
        ..relaxed
    })
}

/// Runs `kind` with the applications' own thresholds.
pub fn solve<T: Scalar>(
    kind: SolverKind,
    instance: &PlacementInstance<T>,
    options: &SolverOptions,
) -> Result<SolveResult<T>, SolveError> {
    match kind {
        SolverKind::Exact => solve_exact(instance, &instance.thresholds(), options),
        SolverKind::Rdp => solve_rdp(instance, options),
        SolverKind::Raa => solve_raa(instance),
        SolverKind::Oracle => brute_force_oracle(instance, &instance.thresholds(), options),
    }
}
