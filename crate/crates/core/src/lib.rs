//! Continuous-time nonlinear filtering laboratory.

pub mod error;
pub mod filter;
pub mod girsanov;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
