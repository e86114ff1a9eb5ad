//! PSD factorizations of slack matrices: rescaling so both sides have
//! bounded operator norm, grid rounding of the rescaled factors, and
//! reconstruction of a 0/1 polytope from the rounded system.

pub mod bounds;
pub mod calculus;
pub mod error;
pub mod pipeline;
pub mod polytope;
pub mod psdfact;
pub mod rescaler;
pub mod rounding;
pub mod symcore;

pub use error::{Error, ErrorClass, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
