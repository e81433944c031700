//! Domain types and the end-to-end delay model.
//!
//! A vehicle always talks to the edge server whose coverage zone contains
//! it (the serving server). An application is realized by querying every
//! basic service it needs in parallel; each query costs the LDM processing
//! on the serving server plus, when the service lives elsewhere, the
//! transmission from the serving server to the closest host. The
//! application delay is the uplink latency, plus the slowest of those
//! service queries, plus the downlink latency.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::scalar::Scalar;
use crate::solver::PlacementInstance;

/// One of the three ETSI basic services.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ServiceKind {
    #[serde(rename = "CA")]
    Ca,
    #[serde(rename = "DEN")]
    Den,
    #[serde(rename = "Media")]
    Media,
}

impl ServiceKind {
    pub const COUNT: usize = 3;
    pub const ALL: [ServiceKind; Self::COUNT] = [ServiceKind::Ca, ServiceKind::Den, ServiceKind::Media];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Ca => "CA",
            ServiceKind::Den => "DEN",
            ServiceKind::Media => "Media",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ServiceKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ca" => Ok(ServiceKind::Ca),
            "den" => Ok(ServiceKind::Den),
            "media" => Ok(ServiceKind::Media),
            _ => Err(ModelError::InvalidParameter(format!("unknown service kind `{s}`"))),
        }
    }
}

/// A subset of [`ServiceKind`]s, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<ServiceKind>", into = "Vec<ServiceKind>")]
pub struct ServiceSet(u8);

impl ServiceSet {
    pub const EMPTY: ServiceSet = ServiceSet(0);
    pub const ALL: ServiceSet = ServiceSet(0b111);

    pub fn of(kinds: &[ServiceKind]) -> Self {
        kinds.iter().fold(Self::EMPTY, |set, &k| set.with(k))
    }

    pub fn from_bits(bits: u8) -> Self {
        ServiceSet(bits & Self::ALL.0)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn with(self, kind: ServiceKind) -> Self {
        ServiceSet(self.0 | 1 << kind.index())
    }

    pub fn union(self, other: ServiceSet) -> Self {
        ServiceSet(self.0 | other.0)
    }

    pub fn contains(self, kind: ServiceKind) -> bool {
        self.0 & (1 << kind.index()) != 0
    }

    pub fn is_superset(self, other: ServiceSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = ServiceKind> {
        ServiceKind::ALL.into_iter().filter(move |&k| self.contains(k))
    }
}

impl From<Vec<ServiceKind>> for ServiceSet {
    fn from(kinds: Vec<ServiceKind>) -> Self {
        Self::of(&kinds)
    }
}

impl From<ServiceSet> for Vec<ServiceKind> {
    fn from(set: ServiceSet) -> Self {
        set.iter().collect()
    }
}

impl fmt::Display for ServiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(ServiceKind::name).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

/// Compute resources: CPU cores and RAM in gigabytes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector<T> {
    pub cores: T,
    pub ram: T,
}

impl<T: Scalar> ResourceVector<T> {
    pub fn new(cores: T, ram: T) -> Self {
        ResourceVector { cores, ram }
    }

    pub fn zero() -> Self {
        ResourceVector { cores: T::zero(), ram: T::zero() }
    }

    /// Componentwise `self <= other`.
    pub fn fits_within(&self, other: &Self) -> bool {
        self.cores <= other.cores && self.ram <= other.ram
    }

    pub fn is_nonnegative(&self) -> bool {
        self.cores >= T::zero() && self.ram >= T::zero()
    }

    pub fn sub(&self, other: &Self) -> Self {
        ResourceVector { cores: self.cores - other.cores, ram: self.ram - other.ram }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec<T> {
    pub kind: ServiceKind,
    pub demand: ResourceVector<T>,
}

/// Resource demand of each basic service, indexed by [`ServiceKind::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceCatalog<T> {
    demands: [ResourceVector<T>; ServiceKind::COUNT],
}

impl<T: Scalar> ServiceCatalog<T> {
    pub fn new(specs: &[ServiceSpec<T>]) -> Result<Self, ModelError> {
        let mut demands: [Option<ResourceVector<T>>; ServiceKind::COUNT] = [None; ServiceKind::COUNT];
        for spec in specs {
            if !spec.demand.is_nonnegative() {
                return Err(ModelError::InvalidParameter(format!("{} demand is negative", spec.kind)));
            }
            if demands[spec.kind.index()].replace(spec.demand).is_some() {
                return Err(ModelError::InvalidParameter(format!("{} listed twice in the service catalog", spec.kind)));
            }
        }
        let mut out = [ResourceVector::zero(); ServiceKind::COUNT];
        for kind in ServiceKind::ALL {
            out[kind.index()] = demands[kind.index()]
                .ok_or_else(|| ModelError::InvalidParameter(format!("{kind} missing from the service catalog")))?;
        }
        Ok(ServiceCatalog { demands: out })
    }

    /// Small, medium and large VM sizes for CA, DEN and Media.
    pub fn standard() -> Self {
        let rv = |c: f64, r: f64| ResourceVector::new(T::of(c), T::of(r));
        ServiceCatalog { demands: [rv(2.0, 2.0), rv(2.0, 4.0), rv(4.0, 6.0)] }
    }

    pub fn demand(&self, kind: ServiceKind) -> ResourceVector<T> {
        self.demands[kind.index()]
    }

    pub fn specs(&self) -> Vec<ServiceSpec<T>> {
        ServiceKind::ALL.iter().map(|&kind| ServiceSpec { kind, demand: self.demand(kind) }).collect()
    }
}

/// A V2X application: the basic services it composes and its delay budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationSpec<T> {
    pub name: String,
    pub required_services: ServiceSet,
    /// Maximum tolerable end-to-end delay in milliseconds.
    pub delay_threshold: T,
    /// Percentage of requests that must meet the threshold.
    pub reliability: T,
}

impl<T: Scalar> ApplicationSpec<T> {
    pub fn new(
        name: impl Into<String>,
        required_services: ServiceSet,
        delay_threshold: T,
        reliability: T,
    ) -> Result<Self, ModelError> {
        let app = ApplicationSpec { name: name.into(), required_services, delay_threshold, reliability };
        app.validate()?;
        Ok(app)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.required_services.is_empty() {
            return Err(ModelError::InvalidParameter(format!("application {} requires no services", self.name)));
        }
        if !(self.delay_threshold > T::zero()) {
            return Err(ModelError::InvalidParameter(format!(
                "application {} has a non-positive delay threshold",
                self.name
            )));
        }
        if !(self.reliability > T::zero() && self.reliability <= T::of(100.0)) {
            return Err(ModelError::InvalidParameter(format!(
                "application {} reliability must lie in (0, 100]",
                self.name
            )));
        }
        Ok(())
    }

    /// PL, SSM, ES, PSW and FCW with their service breakdown, latency
    /// budget and reliability.
    pub fn standard_catalog() -> Vec<Self> {
        use ServiceKind::*;
        let app = |name: &str, kinds: &[ServiceKind], latency: f64, reliability: f64| ApplicationSpec {
            name: name.to_string(),
            required_services: ServiceSet::of(kinds),
            delay_threshold: T::of(latency),
            reliability: T::of(reliability),
        };
        vec![
            app("PL", &[Ca], 50.0, 90.0),
            app("SSM", &[Ca, Den, Media], 20.0, 90.0),
            app("ES", &[Den], 10.0, 95.0),
            app("PSW", &[Ca, Den], 20.0, 95.0),
            app("FCW", &[Ca, Den], 10.0, 95.0),
        ]
    }
}

/// Roadside edge server co-located with an RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer<T> {
    pub id: usize,
    /// Meters along the highway (center of the coverage zone).
    pub position: T,
    pub capacity: ResourceVector<T>,
    pub ldm_demand: ResourceVector<T>,
    pub migration_reserve: ResourceVector<T>,
}

impl<T: Scalar> EdgeServer<T> {
    pub fn new(
        id: usize,
        position: T,
        capacity: ResourceVector<T>,
        ldm_demand: ResourceVector<T>,
        migration_reserve: ResourceVector<T>,
    ) -> Result<Self, ModelError> {
        let server = EdgeServer { id, position, capacity, ldm_demand, migration_reserve };
        if !capacity.is_nonnegative()
            || !ldm_demand.is_nonnegative()
            || !migration_reserve.is_nonnegative()
            || !server.effective_capacity().is_nonnegative()
        {
            return Err(ModelError::NegativeEffectiveCapacity { server: id });
        }
        Ok(server)
    }

    /// Capacity left for a basic service once the LDM and the migration
    /// reserve are accounted for.
    pub fn effective_capacity(&self) -> ResourceVector<T> {
        self.capacity.sub(&self.ldm_demand).sub(&self.migration_reserve)
    }
}

/// Uniform deployment of identical servers along the highway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Topology<T> {
    pub server_count: usize,
    /// Zone width in meters; server `i` covers `[i * spacing, (i + 1) * spacing)`.
    pub spacing: T,
    pub capacity: ResourceVector<T>,
    pub ldm_demand: ResourceVector<T>,
    pub migration_reserve: ResourceVector<T>,
}

impl<T: Scalar> Default for Topology<T> {
    fn default() -> Self {
        Topology {
            server_count: 10,
            spacing: T::of(400.0),
            capacity: ResourceVector::new(T::of(8.0), T::of(8.0)),
            ldm_demand: ResourceVector::new(T::of(4.0), T::of(2.0)),
            migration_reserve: ResourceVector::zero(),
        }
    }
}

impl<T: Scalar> Topology<T> {
    pub fn servers(&self) -> Result<Vec<EdgeServer<T>>, ModelError> {
        if self.server_count == 0 {
            return Err(ModelError::InvalidParameter("topology needs at least one server".into()));
        }
        if !(self.spacing > T::zero()) {
            return Err(ModelError::InvalidParameter("server spacing must be positive".into()));
        }
        let half = T::of(0.5);
        (0..self.server_count)
            .map(|i| {
                let position = (T::of_count(i) + half) * self.spacing;
                EdgeServer::new(i, position, self.capacity, self.ldm_demand, self.migration_reserve)
            })
            .collect()
    }
}

/// Pairwise latency `C[i][j]` in milliseconds: LDM processing on `i` plus
/// the transmission from `i` to `j` (zero when `i == j`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyMatrix<T> {
    size: usize,
    entries: Vec<T>,
}

impl<T: Scalar> LatencyMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self, ModelError> {
        let size = rows.len();
        if size == 0 {
            return Err(ModelError::InvalidLatency("matrix is empty".into()));
        }
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(ModelError::InvalidLatency(format!("row {i} has {} entries, expected {size}", row.len())));
            }
            entries.extend_from_slice(row);
        }
        let matrix = LatencyMatrix { size, entries };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Builds `C[i][j] = processing[i] + transmission(i, j)` for `i != j`
    /// and `C[i][i] = processing[i]`.
    pub fn from_components(
        processing: &[T],
        mut transmission: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, ModelError> {
        let size = processing.len();
        let rows = (0..size)
            .map(|i| {
                (0..size).map(|j| if i == j { processing[i] } else { processing[i] + transmission(i, j) }).collect()
            })
            .collect();
        Self::new(rows)
    }

    /// Every server has the same processing latency and every pair the same
    /// transmission latency.
    pub fn uniform(size: usize, processing: T, transmission: T) -> Result<Self, ModelError> {
        Self::from_components(&vec![processing; size], |_, _| transmission)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for i in 0..self.size {
            let diag = self.get(i, i);
            for j in 0..self.size {
                let v = self.get(i, j);
                if !(v > T::zero()) || !v.is_finite() {
                    return Err(ModelError::InvalidLatency(format!(
                        "C[{i}][{j}] = {v} is not a positive finite latency"
                    )));
                }
                if v < diag {
                    return Err(ModelError::InvalidLatency(format!(
                        "C[{i}][{j}] = {v} is below the processing latency C[{i}][{i}] = {diag}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Exactly one basic service per edge server.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Placement {
    assignment: Vec<ServiceKind>,
}

impl Placement {
    pub fn new(assignment: Vec<ServiceKind>) -> Self {
        Placement { assignment }
    }

    pub fn assignment(&self) -> &[ServiceKind] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn service_on(&self, server: usize) -> ServiceKind {
        self.assignment[server]
    }

    pub fn hosts(&self, kind: ServiceKind) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, &k)| k == kind).map(|(i, _)| i)
    }

    pub fn placed_kinds(&self) -> ServiceSet {
        self.assignment.iter().fold(ServiceSet::EMPTY, |set, &k| set.with(k))
    }

    pub fn covers(&self, required: ServiceSet) -> bool {
        self.placed_kinds().is_superset(required)
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.assignment.iter().map(|k| k.name()).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct DelayParameters<T> {
    /// Uplink latency vehicle to RSU, ms.
    pub d_com: T,
    /// Downlink latency RSU to vehicle, ms.
    pub d_dl: T,
    /// Multiplier applied to the latency matrix.
    pub density_factor: T,
    /// Base of the logarithm in the neighbor-count penalty.
    pub density_penalty_base: T,
    /// Neighbor count above which the penalty starts.
    pub nc_reference: T,
}

impl<T: Scalar> Default for DelayParameters<T> {
    fn default() -> Self {
        DelayParameters {
            d_com: T::one(),
            d_dl: T::one(),
            density_factor: T::one(),
            density_penalty_base: T::of(std::f64::consts::E),
            nc_reference: T::of(20.0),
        }
    }
}

impl<T: Scalar> DelayParameters<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidParameter(what.to_string()));
        if !(self.d_com > T::zero()) {
            return bad("d_com must be positive");
        }
        if !(self.d_dl > T::zero()) {
            return bad("d_dl must be positive");
        }
        if !(self.density_factor >= T::one()) {
            return bad("density factor must be at least 1");
        }
        if !(self.density_penalty_base > T::one()) {
            return bad("density penalty logarithm base must exceed 1");
        }
        if !(self.nc_reference >= T::one()) {
            return bad("nc_reference must be at least 1");
        }
        Ok(())
    }
}

/// Processing latency of an LDM query when `nc` other vehicles share the
/// zone: `base + max(0, log_b(nc / nc_reference))`.
pub fn density_adjusted_processing<T: Scalar>(base: T, nc: usize, params: &DelayParameters<T>) -> T {
    let nc = T::of_count(nc);
    if nc <= params.nc_reference {
        return base;
    }
    base + (nc / params.nc_reference).log(params.density_penalty_base)
}

/// Delay of one service query given the latency row of the serving server:
/// the minimum of `γ·row[j]` over every host `j` of `kind`.
pub fn service_delay_from_row<T: Scalar>(
    placement: &Placement,
    row: &[T],
    kind: ServiceKind,
    density_factor: T,
) -> Result<T, ModelError> {
    placement
        .hosts(kind)
        .map(|j| density_factor * row[j])
        .fold(None, |best: Option<T>, d| Some(best.map_or(d, |b| b.min(d))))
        .ok_or(ModelError::NoHost(kind))
}

pub fn service_delay<T: Scalar>(
    placement: &Placement,
    latency: &LatencyMatrix<T>,
    serving: usize,
    kind: ServiceKind,
    params: &DelayParameters<T>,
) -> Result<T, ModelError> {
    check_server(serving, latency.size())?;
    service_delay_from_row(placement, latency.row(serving), kind, params.density_factor)
}

/// End-to-end delay of `app` for a vehicle whose serving server has the
/// given latency row.
pub fn application_delay_from_row<T: Scalar>(
    placement: &Placement,
    row: &[T],
    app: &ApplicationSpec<T>,
    params: &DelayParameters<T>,
) -> Result<T, ModelError> {
    let mut slowest = T::neg_infinity();
    for kind in app.required_services.iter() {
        slowest = slowest.max(service_delay_from_row(placement, row, kind, params.density_factor)?);
    }
    Ok(params.d_com + slowest + params.d_dl)
}

pub fn application_delay<T: Scalar>(
    placement: &Placement,
    latency: &LatencyMatrix<T>,
    serving: usize,
    app: &ApplicationSpec<T>,
    params: &DelayParameters<T>,
) -> Result<T, ModelError> {
    check_server(serving, latency.size())?;
    application_delay_from_row(placement, latency.row(serving), app, params)
}

fn check_server(index: usize, count: usize) -> Result<(), ModelError> {
    if index < count {
        Ok(())
    } else {
        Err(ModelError::ServerOutOfRange { index, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityViolation<T> {
    pub server: usize,
    pub kind: ServiceKind,
    pub demand: ResourceVector<T>,
    pub available: ResourceVector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayViolation<T> {
    pub zone: usize,
    pub application: String,
    pub delay: T,
    pub threshold: T,
}

/// Outcome of checking a placement against the delay, resource,
/// one-service-per-server and coverage constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport<T> {
    /// Always true: [`Placement`] stores exactly one service per server.
    pub one_service_per_server: bool,
    pub capacity_violations: Vec<CapacityViolation<T>>,
    pub delay_violations: Vec<DelayViolation<T>>,
    pub missing_services: Vec<ServiceKind>,
    pub wrong_server_count: Option<(usize, usize)>,
}

impl<T> ConstraintReport<T> {
    pub fn is_feasible(&self) -> bool {
        self.one_service_per_server
            && self.capacity_violations.is_empty()
            && self.delay_violations.is_empty()
            && self.missing_services.is_empty()
            && self.wrong_server_count.is_none()
    }

    pub fn resources_ok(&self) -> bool {
        self.capacity_violations.is_empty()
    }
}

/// Checks `placement` using the applications' own delay thresholds.
pub fn check_constraints<T: Scalar>(placement: &Placement, instance: &PlacementInstance<T>) -> ConstraintReport<T> {
    check_constraints_with(placement, instance, &instance.thresholds())
}

/// Checks `placement` with an explicit per-application threshold vector,
/// aligned with `instance.applications`.
pub fn check_constraints_with<T: Scalar>(
    placement: &Placement,
    instance: &PlacementInstance<T>,
    thresholds: &[T],
) -> ConstraintReport<T> {
    let mut report = ConstraintReport {
        one_service_per_server: true,
        capacity_violations: Vec::new(),
        delay_violations: Vec::new(),
        missing_services: Vec::new(),
        wrong_server_count: None,
    };
    if placement.len() != instance.servers.len() {
        report.wrong_server_count = Some((placement.len(), instance.servers.len()));
        return report;
    }

    for (server, &kind) in instance.servers.iter().zip(placement.assignment()) {
        let demand = instance.services.demand(kind);
        let available = server.effective_capacity();
        if !demand.fits_within(&available) {
            report.capacity_violations.push(CapacityViolation { server: server.id, kind, demand, available });
        }
    }

    let placed = placement.placed_kinds();
    report.missing_services = instance.required_kinds().iter().filter(|&k| !placed.contains(k)).collect();

    for &zone in &instance.evaluation_zones {
        for (app, &threshold) in instance.applications.iter().zip(thresholds) {
            if !placed.is_superset(app.required_services) {
                continue;
            }
            let delay = application_delay(placement, &instance.latency, zone, app, &instance.params)
                .expect("coverage checked above");
            if delay > threshold {
                report.delay_violations.push(DelayViolation { zone, application: app.name.clone(), delay, threshold });
            }
        }
    }
    report
}
