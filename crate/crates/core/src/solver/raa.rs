//! Resource-aware baseline: fill each server as fully as possible.

use super::{PlacementInstance, SolveResult, SolverKind};
use crate::error::SolveError;
use crate::model::{Placement, ResourceVector, ServiceKind, ServiceSet};
use crate::scalar::Scalar;

/// Share of a server's effective capacity taken by `demand`, averaged over
/// cores and RAM. `None` if the demand does not fit.
fn server_utilization<T: Scalar>(demand: ResourceVector<T>, capacity: ResourceVector<T>) -> Option<T> {
    if !demand.fits_within(&capacity) {
        return None;
    }
    let ratio = |d: T, c: T| if c > T::zero() { d / c } else { T::zero() };
    Some((ratio(demand.cores, capacity.cores) + ratio(demand.ram, capacity.ram)) / T::of(2.0))
}

/// Total utilization of `placement`, or `None` if some server is over
/// capacity. Summed from the last server to the first.
pub fn utilization<T: Scalar>(placement: &Placement, instance: &PlacementInstance<T>) -> Option<T> {
    let mut total = T::zero();
    for (server, &kind) in instance.servers.iter().zip(placement.assignment()).rev() {
        total = server_utilization(instance.services.demand(kind), server.effective_capacity())? + total;
    }
    Some(total)
}

/// Scores within this distance count as ties; different summation orders
/// of the same shares differ in the last bits.
fn tolerance<T: Scalar>(score: T) -> T {
    T::of(1e-9) * score.abs().max(T::one())
}

/// Maximizes [`utilization`] subject to resource limits, one service per
/// server and coverage. Delay thresholds are ignored. Among equal scores
/// the lexicographically smallest assignment wins.
pub fn solve_raa<T: Scalar>(instance: &PlacementInstance<T>) -> Result<SolveResult<T>, SolveError> {
    let n = instance.servers.len();
    let required = instance.required_kinds();
    let masks = 1usize << ServiceKind::COUNT;

    let gain: Vec<[Option<T>; ServiceKind::COUNT]> = instance
        .servers
        .iter()
        .map(|s| ServiceKind::ALL.map(|k| server_utilization(instance.services.demand(k), s.effective_capacity())))
        .collect();

    // best[k][mask]: highest utilization of servers k..n given `mask` is
    // already covered by servers 0..k.
    let mut best = vec![vec![None; masks]; n + 1];
    for (mask, slot) in best[n].iter_mut().enumerate() {
        if ServiceSet::from_bits(mask as u8).is_superset(required) {
            *slot = Some(T::zero());
        }
    }
    for k in (0..n).rev() {
        for mask in 0..masks {
            best[k][mask] = ServiceKind::ALL
                .iter()
                .filter_map(|&kind| {
                    let g = gain[k][kind.index()]?;
                    let rest = best[k + 1][mask | 1 << kind.index()]?;
                    Some(g + rest)
                })
                .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
        }
    }

    let mut nodes = (n * masks) as u64;
    let placement = best[0][0].map(|target| {
        let mut assignment = Vec::with_capacity(n);
        let mut mask = 0usize;
        let mut remaining = target;
        for k in 0..n {
            let kind = ServiceKind::ALL
                .into_iter()
                .find(|&kind| {
                    let next = mask | 1 << kind.index();
                    match (gain[k][kind.index()], best[k + 1][next]) {
                        (Some(g), Some(rest)) => g + rest >= remaining - tolerance(remaining),
                        _ => false,
                    }
                })
                .expect("dynamic program is consistent");
            remaining = best[k + 1][mask | 1 << kind.index()].expect("checked above");
            mask |= 1 << kind.index();
            assignment.push(kind);
            nodes += 1;
        }
        Placement::new(assignment)
    });

    let unbounded = vec![T::infinity(); instance.applications.len()];
    SolveResult::found(SolverKind::Raa, instance, placement, unbounded, nodes)
}
