//! Random placement instances shared by the integration tests.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2x_placement::model::{ApplicationSpec, DelayParameters, LatencyMatrix, ResourceVector, ServiceCatalog, Topology};
use v2x_placement::solver::PlacementInstance;
use v2x_placement::Scalar;

/// Which knobs of a random instance are drawn.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub min_servers: usize,
    pub max_servers: usize,
    /// Draw a per-instance migration reserve that may make some services unplaceable.
    pub random_reserve: bool,
    /// Restrict latencies to half milliseconds instead of arbitrary reals.
    pub half_ms_grid: bool,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape { min_servers: 2, max_servers: 6, random_reserve: true, half_ms_grid: false }
    }
}

/// A random instance together with a random threshold vector.
pub struct RandomCase<T> {
    pub instance: PlacementInstance<T>,
    pub thresholds: Vec<T>,
}

fn half_ms(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    rng.random_range(2 * lo..=2 * hi) as f64 / 2.0
}

/// On the half-millisecond grid f32 and f64 agree on every intermediate sum.
fn latency(rng: &mut ChaCha8Rng, lo: u32, hi: u32, grid: bool) -> f64 {
    if grid {
        half_ms(rng, lo, hi)
    } else {
        rng.random_range(lo as f64..=hi as f64)
    }
}

pub fn random_case<T: Scalar>(seed: u64, shape: InstanceShape) -> RandomCase<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(shape.min_servers..=shape.max_servers);

    let catalog: Vec<ApplicationSpec<T>> = ApplicationSpec::standard_catalog();
    let applications: Vec<ApplicationSpec<T>> = loop {
        let count = rng.random_range(1..=catalog.len());
        let chosen: Vec<_> = catalog.choose_multiple(&mut rng, count).cloned().collect();
        let kinds = chosen.iter().fold(v2x_placement::ServiceSet::EMPTY, |s, a| s.union(a.required_services));
        if kinds.len() <= n {
            break chosen;
        }
    };

    let mut topology = Topology::<T> { server_count: n, ..Topology::default() };
    if shape.random_reserve && rng.random_bool(0.3) {
        topology.migration_reserve =
            ResourceVector::new(T::of(half_ms(&mut rng, 0, 2)), T::of(half_ms(&mut rng, 0, 2)));
    }
    let servers = topology.servers().expect("reserve never exceeds the effective capacity");

    let processing: Vec<T> = (0..n).map(|_| T::of(latency(&mut rng, 3, 5, shape.half_ms_grid))).collect();
    let transmission: Vec<Vec<T>> =
        (0..n).map(|_| (0..n).map(|_| T::of(latency(&mut rng, 1, 5, shape.half_ms_grid))).collect()).collect();
    let matrix = LatencyMatrix::from_components(&processing, |i, j| transmission[i][j]).expect("positive latencies");

    let thresholds = applications.iter().map(|_| T::of(latency(&mut rng, 5, 15, shape.half_ms_grid))).collect();
    let instance =
        PlacementInstance::new(servers, ServiceCatalog::standard(), applications, matrix, DelayParameters::default())
            .expect("valid random instance");
    RandomCase { instance, thresholds }
}
