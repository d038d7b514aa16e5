//! Experiment orchestration for the Bellman-Harris ancestral-lineage
//! library: configuration, reproducible parallel simulation, exact lattice
//! enumeration, theory-versus-simulation comparison reports, and the
//! acceptance self-test.

pub mod acceptance;
pub mod compare;
pub mod config;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod output;
pub mod runners;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
