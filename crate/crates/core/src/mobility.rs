//! Highway traffic generator.
//!
//! Vehicles arrive as a Poisson stream at the start of the highway, enter
//! at rest, accelerate toward the speed limit and keep a safe distance to
//! the vehicle ahead in their lane. There is no lane changing. Every
//! `snapshot_interval` seconds the positions are annotated with the serving
//! server and the number of other vehicles sharing its coverage zone.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::EdgeServer;
use crate::rng::derive_seed;

/// Slack subtracted from every gap target so rounding never eats into `min_gap`.
const GAP_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityParams {
    /// m/s
    pub max_speed: f64,
    /// m/s²
    pub max_accel: f64,
    /// m/s²
    pub max_decel: f64,
    /// Minimum distance between consecutive vehicles in a lane, meters.
    pub min_gap: f64,
    /// meters
    pub highway_length: f64,
    pub lane_count: usize,
    /// Integration step, seconds.
    pub time_step: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            max_speed: 27.7,
            max_accel: 2.6,
            max_decel: 4.5,
            min_gap: 2.5,
            highway_length: 4000.0,
            lane_count: 2,
            time_step: 0.5,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("max_speed", self.max_speed),
            ("max_accel", self.max_accel),
            ("max_decel", self.max_decel),
            ("min_gap", self.min_gap),
            ("highway_length", self.highway_length),
            ("time_step", self.time_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParameter(format!("mobility {name} must be positive")));
            }
        }
        if self.lane_count == 0 {
            return Err(ModelError::InvalidParameter("mobility lane_count must be positive".into()));
        }
        Ok(())
    }

    fn stopping_distance(&self, speed: f64) -> f64 {
        speed * speed / (2.0 * self.max_decel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficScenario {
    pub name: String,
    /// vehicles per hour
    pub arrival_rate: f64,
    /// seconds
    pub duration: f64,
    /// seconds
    pub snapshot_interval: f64,
    pub seed: u64,
    pub runs: usize,
}

impl Default for TrafficScenario {
    fn default() -> Self {
        Self::moderate()
    }
}

impl TrafficScenario {
    pub fn new(name: impl Into<String>, arrival_rate: f64) -> Self {
        TrafficScenario { name: name.into(), arrival_rate, duration: 1500.0, snapshot_interval: 10.0, seed: 0, runs: 5 }
    }

    /// 1500 vehicles/hour.
    pub fn moderate() -> Self {
        Self::new("moderate", 1500.0)
    }

    /// 1800 vehicles/hour.
    pub fn heavy() -> Self {
        Self::new("heavy", 1800.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "scenario {}: arrival rate must be non-negative",
                self.name
            )));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("scenario {}: duration must be non-negative", self.name)));
        }
        if !(self.snapshot_interval > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "scenario {}: snapshot interval must be positive",
                self.name
            )));
        }
        if self.runs == 0 {
            return Err(ModelError::InvalidParameter(format!("scenario {}: runs must be positive", self.name)));
        }
        Ok(())
    }

    pub fn snapshot_count(&self) -> usize {
        (self.duration / self.snapshot_interval + 1e-9).floor() as usize
    }

    /// Seed of the traffic of run `run`.
    pub fn traffic_seed(&self, run: usize) -> u64 {
        derive_seed(self.seed, &[0x7472_6166, run as u64])
    }

    /// Expected number of arrivals over the scenario duration.
    pub fn expected_arrivals(&self) -> f64 {
        self.arrival_rate / 3600.0 * self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// seconds
    pub time: f64,
    pub lane: usize,
}

/// Poisson arrivals on `[0, duration]`, lanes assigned round-robin.
pub fn generate_arrivals(scenario: &TrafficScenario, lane_count: usize, seed: u64) -> Vec<Arrival> {
    let rate_per_second = scenario.arrival_rate / 3600.0;
    if !(rate_per_second > 0.0) || lane_count == 0 {
        return Vec::new();
    }
    let gap = Exp::new(rate_per_second).expect("positive rate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t > scenario.duration {
            return arrivals;
        }
        arrivals.push(Arrival { time: t, lane: arrivals.len() % lane_count });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    /// meters from the start of the highway
    pub position: f64,
    /// m/s
    pub speed: f64,
    pub lane: usize,
}

/// Speed and displacement of a vehicle over one step.
fn advance(vehicle: &VehicleState, leader: Option<&VehicleState>, dt: f64, p: &MobilityParams) -> (f64, f64) {
    let v = vehicle.speed;
    let upper = p.max_speed.min(v + p.max_accel * dt);
    let lower = (v - p.max_decel * dt).max(0.0);

    let next = match leader {
        None => upper,
        Some(lead) => {
            // Both bounds are increasing in the new speed; full braking
            // always satisfies them when the previous step did.
            //
            // 1. Stopping point: if both brake at max_decel from now on, the
            //    follower still stops min_gap behind the leader.
            let reach = lead.position + p.stopping_distance(lead.speed) - p.min_gap - GAP_SLACK;
            let a = 1.0 / (2.0 * p.max_decel);
            let b = dt / 2.0;
            let c = vehicle.position + v * dt / 2.0 - reach;
            let disc = b * b - 4.0 * a * c;
            let by_stopping = if disc >= 0.0 { (-b + disc.sqrt()) / (2.0 * a) } else { f64::NEG_INFINITY };
            // 2. Current gap after the step is at least min_gap.
            let room = lead.position - p.min_gap - GAP_SLACK - vehicle.position;
            let by_gap = 2.0 * room / dt - v;
            let target = upper.min(by_stopping).min(by_gap);
            if target > lower {
                target
            } else {
                lower
            }
        }
    };

    let displacement = if next == 0.0 && v < p.max_decel * dt {
        // Comes to rest inside the step.
        p.stopping_distance(v)
    } else {
        (v + next) * dt / 2.0
    };
    (next, displacement)
}

/// Advances every vehicle by `dt` seconds. Vehicles that pass the end of
/// the highway are removed. The result is ordered by vehicle id.
pub fn step(world: &[VehicleState], dt: f64, params: &MobilityParams) -> Vec<VehicleState> {
    let mut order: Vec<&VehicleState> = world.iter().collect();
    // Front of each lane first, so leaders are updated before followers.
    order.sort_by(|x, y| x.lane.cmp(&y.lane).then(y.position.total_cmp(&x.position)).then(x.id.cmp(&y.id)));

    let mut next: Vec<VehicleState> = Vec::with_capacity(world.len());
    let mut leader: Option<VehicleState> = None;
    for (i, vehicle) in order.iter().enumerate() {
        if i == 0 || order[i - 1].lane != vehicle.lane {
            leader = None;
        }
        let (speed, displacement) = advance(vehicle, leader.as_ref(), dt, params);
        let moved = VehicleState { position: vehicle.position + displacement, speed, ..**vehicle };
        next.push(moved);
        leader = Some(moved);
    }
    next.retain(|v| v.position <= params.highway_length);
    next.sort_by_key(|v| v.id);
    next
}

/// Maps highway positions to coverage zones of equal width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneMap {
    pub origin: f64,
    pub width: f64,
    pub count: usize,
}

impl ZoneMap {
    pub fn new(origin: f64, width: f64, count: usize) -> Result<Self, ModelError> {
        if !(width > 0.0) || count == 0 {
            return Err(ModelError::InvalidParameter("zone map needs a positive width and at least one zone".into()));
        }
        Ok(ZoneMap { origin, width, count })
    }

    /// Zones centered on uniformly spaced servers.
    pub fn from_servers(servers: &[EdgeServer<f64>]) -> Result<Self, ModelError> {
        match servers {
            [] => Err(ModelError::InvalidParameter("no servers".into())),
            [only] => Self::new(0.0, 2.0 * only.position, 1),
            [first, second, ..] => {
                let width = second.position - first.position;
                for w in servers.windows(2) {
                    if ((w[1].position - w[0].position) - width).abs() > 1e-9 * width.abs().max(1.0) {
                        return Err(ModelError::InvalidParameter("servers are not uniformly spaced".into()));
                    }
                }
                Self::new(first.position - width / 2.0, width, servers.len())
            }
        }
    }

    /// Serving server of a vehicle at `position`, clamped to valid ids.
    pub fn zone_of(&self, position: f64) -> usize {
        let raw = ((position - self.origin) / self.width).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.count - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleSnapshot {
    pub vehicle: u64,
    pub position: f64,
    pub speed: f64,
    pub lane: usize,
    pub serving_server: usize,
    /// Other vehicles in the same coverage zone.
    pub neighbor_count: usize,
    /// seconds
    pub timestamp: f64,
}

pub fn snapshot(world: &[VehicleState], t: f64, zones: &ZoneMap) -> Vec<VehicleSnapshot> {
    let mut occupancy = vec![0usize; zones.count];
    let zone_ids: Vec<usize> = world.iter().map(|v| zones.zone_of(v.position)).collect();
    for &z in &zone_ids {
        occupancy[z] += 1;
    }
    world
        .iter()
        .zip(zone_ids)
        .map(|(v, z)| VehicleSnapshot {
            vehicle: v.id,
            position: v.position,
            speed: v.speed,
            lane: v.lane,
            serving_server: z,
            neighbor_count: occupancy[z] - 1,
            timestamp: t,
        })
        .collect()
}

/// One sampling instant of a traffic run.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub vehicles: Vec<VehicleSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRun {
    pub frames: Vec<Frame>,
    pub scheduled_arrivals: usize,
    pub entered: usize,
    pub exited: usize,
    /// Smallest same-lane distance seen at any snapshot.
    pub min_same_lane_gap: f64,
}

/// Simulates one run of `scenario` and keeps a frame every snapshot interval.
pub fn simulate_traffic(
    scenario: &TrafficScenario,
    params: &MobilityParams,
    zones: &ZoneMap,
    run: usize,
) -> Result<TrafficRun, ModelError> {
    params.validate()?;
    scenario.validate()?;
    let dt = params.time_step;
    let steps_per_snapshot = (scenario.snapshot_interval / dt).round() as usize;
    if steps_per_snapshot == 0 || ((steps_per_snapshot as f64) * dt - scenario.snapshot_interval).abs() > 1e-9 {
        return Err(ModelError::InvalidParameter(format!(
            "snapshot interval {} is not a multiple of the time step {dt}",
            scenario.snapshot_interval
        )));
    }
    let total_steps = scenario.snapshot_count() * steps_per_snapshot;

    let arrivals = generate_arrivals(scenario, params.lane_count, scenario.traffic_seed(run));
    let mut pending = arrivals.iter().peekable();
    let mut waiting: Vec<Vec<Arrival>> = vec![Vec::new(); params.lane_count];
    let mut world: Vec<VehicleState> = Vec::new();
    let mut next_id = 0u64;
    let mut entered = 0;
    let mut exited = 0;
    let mut frames = Vec::with_capacity(scenario.snapshot_count());
    let mut min_gap = f64::INFINITY;

    for s in 0..total_steps {
        let t = s as f64 * dt;
        while let Some(a) = pending.next_if(|a| a.time <= t) {
            waiting[a.lane].push(*a);
        }
        for (lane, queue) in waiting.iter_mut().enumerate() {
            if queue.is_empty() {
                continue;
            }
            let last = world.iter().filter(|v| v.lane == lane).min_by(|x, y| x.position.total_cmp(&y.position));
            let clear = last.is_none_or(|v| {
                v.position >= params.min_gap + GAP_SLACK
                    && v.position + params.stopping_distance(v.speed) >= params.min_gap + GAP_SLACK
            });
            if clear {
                queue.remove(0);
                world.push(VehicleState { id: next_id, position: 0.0, speed: 0.0, lane });
                next_id += 1;
                entered += 1;
            }
        }

        let before = world.len();
        world = step(&world, dt, params);
        exited += before - world.len();

        if (s + 1) % steps_per_snapshot == 0 {
            let time = (s + 1) as f64 * dt;
            min_gap = min_gap.min(min_same_lane_gap(&world));
            frames.push(Frame { time, vehicles: snapshot(&world, time, zones) });
        }
    }

    Ok(TrafficRun { frames, scheduled_arrivals: arrivals.len(), entered, exited, min_same_lane_gap: min_gap })
}

/// Smallest distance between consecutive vehicles sharing a lane.
pub fn min_same_lane_gap(world: &[VehicleState]) -> f64 {
    let mut sorted: Vec<&VehicleState> = world.iter().collect();
    sorted.sort_by(|x, y| x.lane.cmp(&y.lane).then(x.position.total_cmp(&y.position)));
    sorted
        .windows(2)
        .filter(|w| w[0].lane == w[1].lane)
        .map(|w| w[1].position - w[0].position)
        .fold(f64::INFINITY, f64::min)
}

/// Writes `time,id,position,speed,lane,zone` rows for every frame.
pub fn write_trajectory_csv<W: Write>(mut out: W, run: &TrafficRun) -> io::Result<()> {
    writeln!(out, "time,id,position,speed,lane,zone")?;
    for frame in &run.frames {
        for v in &frame.vehicles {
            writeln!(out, "{},{},{},{},{},{}", frame.time, v.vehicle, v.position, v.speed, v.lane, v.serving_server)?;
        }
    }
    Ok(())
}
