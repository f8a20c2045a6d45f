//! Sparse-representation activity classification with SVD-derived projections,
//! and multi-modal occupancy estimation by support vector regression and
//! weighted-majority fusion.

pub mod error;
pub mod dataset;
pub mod solver;
pub mod features;
pub mod projection;
pub mod src_classifier;
pub mod smo;
pub mod svr;
pub mod baselines;
pub mod metrics;
pub mod fusion;

pub use error::{Error, Result};

pub use nalgebra;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
