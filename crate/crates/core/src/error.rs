use thiserror::Error;

use crate::model::ServiceKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("server {server}: effective capacity is negative (capacity minus LDM demand minus migration reserve)")]
    NegativeEffectiveCapacity { server: usize },
    #[error("no server hosts {0}")]
    NoHost(ServiceKind),
    #[error("latency matrix: {0}")]
    InvalidLatency(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("server index {index} out of range for {count} servers")]
    ServerOutOfRange { index: usize, count: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("search exceeded the node budget of {budget}")]
    NodeBudgetExceeded { budget: u64 },
    #[error("enumeration of {size} assignments exceeds the oracle cap of {cap}")]
    OracleCapExceeded { size: u128, cap: u128 },
    #[error("threshold vector has {got} entries, expected {expected}")]
    ThresholdArity { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
