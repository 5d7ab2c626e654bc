//! Tubular neighbourhoods, control data and smooth weak deformation
//! retractions for stratified subsets of Euclidean space.
//!
//! The crate is organised bottom-up:
//!
//! * [`smoothcore`]: dual numbers, bump functions, vector fields, an embedded
//!   Runge–Kutta integrator, partitions of unity and group averaging.
//! * [`strata`]: strata, conical charts, group actions and the built-in
//!   scenario library.
//! * [`tubular`]: Euler-like vector fields, convenient tubular
//!   neighbourhoods and shrinking.
//! * [`controldata`]: per-stratum collections, the tangential and
//!   commutative builders, conjugation and the property verifiers.
//! * [`retract`]: the homotopy assembled from the per-dimension retractions.
//! * [`examples`]: momentum maps, the dihedral Hilbert map and reduction.
//! * [`cli`]: configuration, the scenario pipeline and report writing.

pub mod cli;
pub mod controldata;
pub mod error;
pub mod examples;
pub mod retract;
pub mod smoothcore;
pub mod strata;
pub mod tubular;

pub use error::{GeomError, Result};
pub use smoothcore::Point;
