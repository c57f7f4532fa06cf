//! Numerical laboratory for finite-dimensional quantum filtering.
//!
//! The crate decides observability and absolute continuity for a quantum
//! stochastic model with homodyne or photon-counting detection, simulates
//! correctly and incorrectly initialized filters on a shared observation
//! record, and checks the simulations against exact characteristic
//! functions of the observation process.

pub mod abscont;
pub mod charfn;
pub mod error;
pub mod harness;
pub mod matops;
pub mod model;
pub mod observability;
pub mod trajectories;

pub use error::{Error, Result};
pub use matops::{ComplexMatrix, HermitianMatrix, VectorizedMatrix, C64};
pub use model::{
    generator, measurement_superop, DensityMatrix, Detection, QsdeModel, Superoperator,
};
