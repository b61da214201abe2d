pub mod benchmark;
pub mod direct;
pub mod error;
pub mod estimate;
pub mod filter;
pub mod image;
pub mod inference;
pub mod io;
pub mod learned;
pub mod metrics;
pub mod real;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use estimate::{Estimate, Estimator};
