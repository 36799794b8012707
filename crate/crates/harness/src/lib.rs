//! Experiment plumbing around `ngn-core`: TOML sweep configs, grid
//! execution, CSV output and the audit suite behind the `ngn` binary.

pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod suite;
pub mod sweep;

pub use config::{parse_config, parse_config_str};
pub use error::{HarnessError, Result};
pub use output::{emit_summary, emit_trajectory, write_sweep_outputs};
pub use sweep::{run_sweep, Cell, CellOutcome, CellResult, OptimizerBlock, OutputConfig, ProblemConfig, SweepResult, SweepSpec};
