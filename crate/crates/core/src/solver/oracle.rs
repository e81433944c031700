use super::{check_arity, objective, PlacementInstance, SolveResult, SolverKind, SolverOptions};
use crate::error::SolveError;
use crate::model::{check_constraints_with, Placement, ServiceKind};
use crate::scalar::Scalar;

/// Exhaustive enumeration of every assignment in lexicographic order.
///
/// Keeps the first assignment of minimum objective among those passing
/// [`check_constraints_with`]. Shares no code with the branch-and-bound
/// search beyond the delay model itself.
pub fn brute_force_oracle<T: Scalar>(
    instance: &PlacementInstance<T>,
    thresholds: &[T],
    options: &SolverOptions,
) -> Result<SolveResult<T>, SolveError> {
    check_arity(instance, thresholds)?;
    let n = instance.servers.len();
    let size = (ServiceKind::COUNT as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > options.oracle_cap as u128 {
        return Err(SolveError::OracleCapExceeded { size, cap: options.oracle_cap as u128 });
    }

    let mut digits = vec![0usize; n];
    let mut best: Option<(T, Placement)> = None;
    let mut evaluated = 0u64;
    loop {
        evaluated += 1;
        let candidate = Placement::new(digits.iter().map(|&d| ServiceKind::ALL[d]).collect());
        if check_constraints_with(&candidate, instance, thresholds).is_feasible() {
            let value = objective(&candidate, instance)?;
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, candidate));
            }
        }
        // Odometer, last server fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return SolveResult::found(
                    SolverKind::Oracle,
                    instance,
                    best.map(|(_, p)| p),
                    thresholds.to_vec(),
                    evaluated,
                );
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < ServiceKind::COUNT {
                break;
            }
            digits[pos] = 0;
        }
    }
}
