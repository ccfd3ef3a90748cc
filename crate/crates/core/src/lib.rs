//! Low-rank approximation, PSD-constrained approximation and ridge regression
//! for positive semidefinite matrices, reading few entries of the input.
//!
//! Every algorithm reads the matrix through [`oracle::PsdOracle`], which
//! counts distinct entries touched.

pub mod cli;
pub mod config;
pub mod error;
pub mod exact;
pub mod formats;
pub mod generate;
pub mod hardbench;
pub mod linalg;
pub mod lowrank;
pub mod matrix;
pub mod oracle;
pub mod pcp;
pub mod regression;
pub mod rng;
pub mod sampling;
pub mod scores;

pub use config::AlgoConfig;
pub use error::{Error, Result};
pub use lowrank::LowRankFactor;
pub use matrix::PsdMatrix;
pub use oracle::PsdOracle;
pub use rng::Seed;
