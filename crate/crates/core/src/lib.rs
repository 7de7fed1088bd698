pub mod closed_forms;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod operators;
pub mod regularize;
pub mod scheme;
pub mod verifier;

pub use error::{Error, Result};
