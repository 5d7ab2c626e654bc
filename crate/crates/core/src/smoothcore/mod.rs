//! Smooth-calculus kernel: dual numbers, bumps, fields, flows, partitions
//! of unity and group averages.

pub mod bump;
pub mod dual;
pub mod field;
pub mod ode;
pub mod pou;
pub mod vecops;

/// A point or tangent vector in the ambient `R^n`.
pub type Point = Vec<f64>;

pub use bump::{bump, smooth_step, BumpSpec};
pub use dual::Dual;
pub use field::{extend_by_constant, lie_derivative, ScalarField, VectorField};
pub use ode::{flow, flow_until, integrate, FlowOptions, FlowOutcome};
pub use pou::{group_average, partition_of_unity, PartitionOfUnity};
