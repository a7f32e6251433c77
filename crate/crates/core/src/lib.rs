pub mod analysis;
pub mod engine;
pub mod error;
pub mod ez_baseline;
pub mod meanfield;
pub mod population;
pub mod strategy;
pub mod sweep;
pub mod voting;

pub use error::{Error, Result};
