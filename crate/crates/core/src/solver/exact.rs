//! Depth-first branch and bound over server-by-server assignments.
//!
//! Servers are assigned in index order and each server tries CA, DEN,
//! Media in that order, so leaves are visited in lexicographic order and
//! the first minimum found is the lexicographically smallest one.
//!
//! Bound: with servers `0..k` fixed, the eventual hosts of a service are a
//! subset of its fixed hosts plus the servers `k..n`. The minimum latency
//! over that superset never exceeds the true service delay, so the bound
//! built from it never exceeds the true application delay. It is evaluated
//! with the same floating point operations, in the same order, as
//! [`objective`](super::objective); at a leaf it equals the objective.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{check_arity, PlacementInstance, SolveResult, SolverKind, SolverOptions};
use crate::error::SolveError;
use crate::model::{Placement, ResourceVector, ServiceKind, ServiceSet};
use crate::scalar::Scalar;

/// Global minimizer of the summed delay subject to `thresholds`, the
/// resource limits, one service per server and coverage.
///
/// Returns an infeasible result (no placement) when nothing satisfies the
/// constraints, and an error when the node budget is exhausted.
pub fn solve_exact<T: Scalar>(
    instance: &PlacementInstance<T>,
    thresholds: &[T],
    options: &SolverOptions,
) -> Result<SolveResult<T>, SolveError> {
    check_arity(instance, thresholds)?;
    let problem = Problem::new(instance, thresholds);
    let counter = AtomicU64::new(0);

    // One independent subtree per service on server 0.
    let outcomes: Vec<Result<Subtree<T>, SolveError>> = ServiceKind::ALL
        .par_iter()
        .map(|&first| {
            let mut search = Search::new(&problem, &counter, options.node_budget);
            search.branch(0, first)?;
            Ok(Subtree { best: search.best, nodes: search.nodes })
        })
        .collect();

    let mut best: Option<(T, Vec<ServiceKind>)> = None;
    let mut nodes = 0;
    for outcome in outcomes {
        let sub = outcome?;
        nodes += sub.nodes;
        if let Some((value, assignment)) = sub.best {
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, assignment));
            }
        }
    }

    let search_value = best.as_ref().map(|(v, _)| *v);
    let result = SolveResult::found(
        SolverKind::Exact,
        instance,
        best.map(|(_, a)| Placement::new(a)),
        thresholds.to_vec(),
        nodes,
    )?;
    debug_assert_eq!(result.objective, search_value);
    Ok(result)
}

struct Subtree<T> {
    best: Option<(T, Vec<ServiceKind>)>,
    nodes: u64,
}

struct Problem<'a, T> {
    instance: &'a PlacementInstance<T>,
    thresholds: &'a [T],
    n: usize,
    /// `γ·C[zone][j]` per evaluation zone.
    scaled: Vec<Vec<T>>,
    /// `suffix_min[z][k] = min_{j >= k} scaled[z][j]`, `+inf` at `k = n`.
    suffix_min: Vec<Vec<T>>,
    capacity: Vec<ResourceVector<T>>,
    required: ServiceSet,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(instance: &'a PlacementInstance<T>, thresholds: &'a [T]) -> Self {
        let n = instance.servers.len();
        let gamma = instance.params.density_factor;
        let scaled: Vec<Vec<T>> = instance
            .evaluation_zones
            .iter()
            .map(|&z| instance.latency.row(z).iter().map(|&c| gamma * c).collect())
            .collect();
        let suffix_min = scaled
            .iter()
            .map(|row| {
                let mut suffix = vec![T::infinity(); n + 1];
                for k in (0..n).rev() {
                    suffix[k] = suffix[k + 1].min(row[k]);
                }
                suffix
            })
            .collect();
        Problem {
            instance,
            thresholds,
            n,
            scaled,
            suffix_min,
            capacity: instance.servers.iter().map(|s| s.effective_capacity()).collect(),
            required: instance.required_kinds(),
        }
    }
}

struct Search<'p, 'a, T> {
    problem: &'p Problem<'a, T>,
    counter: &'p AtomicU64,
    budget: u64,
    assignment: Vec<ServiceKind>,
    placed: [usize; ServiceKind::COUNT],
    /// Best fixed-host latency per zone and service, `+inf` if not yet placed.
    nearest: Vec<[T; ServiceKind::COUNT]>,
    best: Option<(T, Vec<ServiceKind>)>,
    nodes: u64,
}

impl<'p, 'a, T: Scalar> Search<'p, 'a, T> {
    fn new(problem: &'p Problem<'a, T>, counter: &'p AtomicU64, budget: u64) -> Self {
        Search {
            problem,
            counter,
            budget,
            assignment: Vec::with_capacity(problem.n),
            placed: [0; ServiceKind::COUNT],
            nearest: vec![[T::infinity(); ServiceKind::COUNT]; problem.scaled.len()],
            best: None,
            nodes: 0,
        }
    }

    fn tick(&mut self) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.counter.fetch_add(1, Ordering::Relaxed) >= self.budget {
            return Err(SolveError::NodeBudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    /// Assigns `kind` to server `k` and explores below it.
    fn branch(&mut self, k: usize, kind: ServiceKind) -> Result<(), SolveError> {
        let demand = self.problem.instance.services.demand(kind);
        if !demand.fits_within(&self.problem.capacity[k]) {
            return Ok(());
        }
        self.tick()?;

        self.assignment.push(kind);
        self.placed[kind.index()] += 1;
        let saved: Vec<T> = self.nearest.iter().map(|n| n[kind.index()]).collect();
        for (z, nearest) in self.nearest.iter_mut().enumerate() {
            let slot = &mut nearest[kind.index()];
            *slot = slot.min(self.problem.scaled[z][k]);
        }

        let depth = k + 1;
        if let Some(bound) = self.bound(depth) {
            let improves = self.best.as_ref().is_none_or(|(b, _)| bound < *b);
            if improves {
                if depth == self.problem.n {
                    self.best = Some((bound, self.assignment.clone()));
                } else {
                    for next in ServiceKind::ALL {
                        self.branch(depth, next)?;
                    }
                }
            }
        }

        for (nearest, old) in self.nearest.iter_mut().zip(saved) {
            nearest[kind.index()] = old;
        }
        self.placed[kind.index()] -= 1;
        self.assignment.pop();
        Ok(())
    }

    /// Lower bound on the objective of any completion of the first `depth`
    /// servers, or `None` if no completion can be feasible.
    fn bound(&self, depth: usize) -> Option<T> {
        let p = self.problem;
        let free = p.n - depth;
        let missing = p.required.iter().filter(|k| self.placed[k.index()] == 0).count();
        if missing > free {
            return None;
        }
        let params = &p.instance.params;
        let mut total = T::zero();
        for (z, nearest) in self.nearest.iter().enumerate() {
            let open = p.suffix_min[z][depth];
            for (app, &threshold) in p.instance.applications.iter().zip(p.thresholds) {
                let mut slowest = T::neg_infinity();
                for kind in app.required_services.iter() {
                    slowest = slowest.max(nearest[kind.index()].min(open));
                }
                let delay = params.d_com + slowest + params.d_dl;
                if !(delay <= threshold) {
                    return None;
                }
                total = total + delay;
            }
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ApplicationSpec, DelayParameters, LatencyMatrix, ServiceCatalog, ServiceKind::*, Topology};
    use crate::solver::{brute_force_oracle, objective};

    fn two_server_instance(m: LatencyMatrix<f64>) -> PlacementInstance<f64> {
        let psw = ApplicationSpec::new("PSW", ServiceSet::of(&[Ca, Den]), 20.0, 95.0).unwrap();
        let servers = Topology { server_count: 2, ..Topology::<f64>::default() }.servers().unwrap();
        PlacementInstance::new(servers, ServiceCatalog::standard(), vec![psw], m, DelayParameters::default()).unwrap()
    }

    #[test]
    fn two_servers_pick_the_cheaper_coverage_feasible_assignment() {
        // Zone 0 is cheap to reach from zone 1 but not the other way round.
        let m = LatencyMatrix::new(vec![vec![3.0, 9.0], vec![5.0, 4.0]]).unwrap();
        let inst = two_server_instance(m);
        // Hand enumeration of all 9 assignments: only [CA, DEN] and [DEN, CA] cover.
        // [CA, DEN]: zone 0 = 1 + max(3, 9) + 1 = 11, zone 1 = 1 + max(5, 4) + 1 = 7 -> 18
        // [DEN, CA]: zone 0 = 1 + max(9, 3) + 1 = 11, zone 1 = 1 + max(4, 5) + 1 = 7 -> 18
        // Tie: lexicographically smaller [CA, DEN] wins.
        let r = solve_exact(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        assert_eq!(r.placement, Some(Placement::new(vec![Ca, Den])));
        assert_eq!(r.objective, Some(18.0));

        let m = LatencyMatrix::new(vec![vec![3.0, 9.0], vec![5.0, 4.0]]).unwrap();
        let ca_only = ApplicationSpec::new("PL", ServiceSet::of(&[Ca]), 50.0, 90.0).unwrap();
        let den_only = ApplicationSpec::new("ES", ServiceSet::of(&[Den]), 50.0, 90.0).unwrap();
        let servers = Topology { server_count: 2, ..Topology::<f64>::default() }.servers().unwrap();
        let inst = PlacementInstance::new(
            servers,
            ServiceCatalog::standard(),
            vec![ca_only, den_only],
            m,
            DelayParameters::default(),
        )
        .unwrap();
        // [CA, DEN]: PL 5 + 7, ES 11 + 6 -> 29;  [DEN, CA]: PL 11 + 6, ES 5 + 7 -> 29
        let r = solve_exact(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        assert_eq!(r.objective, Some(29.0));
        assert_eq!(r.placement, Some(Placement::new(vec![Ca, Den])));
    }

    #[test]
    fn asymmetric_two_server_choice() {
        let pl = ApplicationSpec::new("PL", ServiceSet::of(&[Ca]), 50.0, 90.0).unwrap();
        let pl2 = ApplicationSpec::new("PL2", ServiceSet::of(&[Ca]), 50.0, 90.0).unwrap();
        let es = ApplicationSpec::new("ES", ServiceSet::of(&[Den]), 50.0, 90.0).unwrap();
        let servers = Topology { server_count: 2, ..Topology::<f64>::default() }.servers().unwrap();
        let m = LatencyMatrix::new(vec![vec![3.0, 4.0], vec![7.0, 5.0]]).unwrap();
        let inst = PlacementInstance::new(
            servers,
            ServiceCatalog::standard(),
            vec![pl, pl2, es],
            m,
            DelayParameters::default(),
        )
        .unwrap();
        // [CA, DEN]: z0 5 + 5 + 6, z1 9 + 9 + 7 -> 41
        // [DEN, CA]: z0 6 + 6 + 5, z1 7 + 7 + 9 -> 40
        let r = solve_exact(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        assert_eq!(r.objective, Some(40.0));
        assert_eq!(r.placement, Some(Placement::new(vec![Den, Ca])));
        // ES capped at 8.5 rules out [DEN, CA] (zone 1 sees 9).
        let r = solve_exact(&inst, &[50.0, 50.0, 8.5], &SolverOptions::default()).unwrap();
        assert_eq!(r.objective, Some(41.0));
        assert_eq!(r.placement, Some(Placement::new(vec![Ca, Den])));
        let r = solve_exact(&inst, &[50.0, 50.0, 6.5], &SolverOptions::default()).unwrap();
        assert!(!r.is_feasible());
    }

    #[test]
    fn infinite_thresholds_never_infeasible() {
        let inst = PlacementInstance::<f64>::standard(&Topology { server_count: 4, ..Topology::default() }).unwrap();
        let inf = vec![f64::INFINITY; inst.applications.len()];
        let r = solve_exact(&inst, &inf, &SolverOptions::default()).unwrap();
        assert!(r.is_feasible());
    }

    #[test]
    fn zero_thresholds_infeasible() {
        let inst = PlacementInstance::<f64>::standard(&Topology { server_count: 4, ..Topology::default() }).unwrap();
        let zero = vec![0.0; inst.applications.len()];
        let r = solve_exact(&inst, &zero, &SolverOptions::default()).unwrap();
        assert!(!r.is_feasible());
        assert_eq!(r.objective, None);
    }

    #[test]
    fn default_instance_optimum() {
        let inst = PlacementInstance::<f64>::standard(&Topology::default()).unwrap();
        let r = solve_exact(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        let x = r.placement.clone().unwrap();
        // Exactly one Media; the rest CA/DEN; lexicographically smallest.
        let mut expected = vec![Ca; 8];
        expected.push(Den);
        expected.push(Media);
        assert_eq!(x.assignment(), expected.as_slice());
        // Per zone: CA/DEN host zones sum 2*5 + 4 + 7*4 = 42, Media zone 45.
        assert_eq!(r.objective, Some(9.0 * 42.0 + 45.0));
        assert_eq!(objective(&x, &inst).unwrap(), r.objective.unwrap());
    }

    #[test]
    fn node_budget_guard() {
        let inst = PlacementInstance::<f64>::standard(&Topology::default()).unwrap();
        let opts = SolverOptions { node_budget: 10, ..SolverOptions::default() };
        let err = solve_exact(&inst, &inst.thresholds(), &opts).unwrap_err();
        assert_eq!(err, SolveError::NodeBudgetExceeded { budget: 10 });
    }

    #[test]
    fn works_in_single_precision() {
        let inst = PlacementInstance::<f32>::standard(&Topology { server_count: 5, ..Topology::default() }).unwrap();
        let r = solve_exact(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        let o = brute_force_oracle(&inst, &inst.thresholds(), &SolverOptions::default()).unwrap();
        assert_eq!(r.objective, o.objective);
        assert_eq!(r.placement, o.placement);
    }

    #[test]
    fn arity_mismatch() {
        let inst = PlacementInstance::<f64>::standard(&Topology { server_count: 3, ..Topology::default() }).unwrap();
        assert!(matches!(
            solve_exact(&inst, &[10.0], &SolverOptions::default()),
            Err(SolveError::ThresholdArity { expected: 5, got: 1 })
        ));
    }
}
