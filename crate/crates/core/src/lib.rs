//! Delay-minimal placement of V2X basic services (CA, DEN, Media) on
//! roadside edge servers along a highway, and a traffic-driven harness that
//! evaluates placements against simulated vehicles.
//!
//! The placement model and solvers are generic over [`Scalar`]; the aliases
//! below fix the scalar to `f64` (and `f32` where useful).

// Validation is written as `!(x > 0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod mobility;
pub mod model;
mod rng;
pub mod scalar;
pub mod solver;

pub use error::{ModelError, SolveError};
pub use model::{Placement, ServiceKind, ServiceSet};
pub use rng::derive_seed;
pub use scalar::Scalar;
pub use solver::{RelaxationRule, SolverKind, SolverOptions};

pub type ResourceVector = model::ResourceVector<f64>;
pub type ServiceSpec = model::ServiceSpec<f64>;
pub type ServiceCatalog = model::ServiceCatalog<f64>;
pub type ApplicationSpec = model::ApplicationSpec<f64>;
pub type EdgeServer = model::EdgeServer<f64>;
pub type Topology = model::Topology<f64>;
pub type LatencyMatrix = model::LatencyMatrix<f64>;
pub type DelayParameters = model::DelayParameters<f64>;
pub type ConstraintReport = model::ConstraintReport<f64>;
pub type PlacementInstance = solver::PlacementInstance<f64>;
pub type SolveResult = solver::SolveResult<f64>;

pub type PlacementInstanceF32 = solver::PlacementInstance<f32>;
pub type SolveResultF32 = solver::SolveResult<f32>;
