pub mod applications;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod grid;
pub mod nn;
pub mod spatial;
pub mod trainer;

pub use error::{Error, Result};
