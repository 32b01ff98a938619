//! Experiment registry, configuration and result emission for `pathlab`.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiments;
pub mod registry;
pub mod result;

pub use config::{ExperimentConfig, OutputFormat};
pub use emit::emit;
pub use error::{CliError, Result};
pub use experiments::run_experiment;
pub use registry::{ExperimentEntry, REGISTRY};
pub use result::{Check, ExperimentResult, Table};
