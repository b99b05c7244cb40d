pub mod coefficients;
pub mod conditions;
pub mod config;
pub mod dilatation;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linear;
pub mod quasilinear;
pub mod solution;
pub mod transforms;
pub mod verify;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use grid::{GridField, ScalarField};
pub use solution::Solution;
