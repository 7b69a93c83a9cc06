//! Experiment harness: configs, presets, rate-grid tuning, result files and plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod output;
pub mod plot;
pub mod preset;
pub mod runner;
pub mod tune;

pub use config::{ExperimentConfig, GridSpec, ProblemDescriptor, SolverKind, SolverSpec};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentReport};
pub use instance::Instance;
pub use preset::preset;
pub use runner::{run_solver, RunOutput};
pub use tune::{tune_solver, TuneResult};
