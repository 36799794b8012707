//! Normalized Gauss-Newton (NGN) step-sizes with momentum and diagonal
//! preconditioning.
//!
//! The crate is `no_std` (it needs `alloc`) and contains:
//!
//! * [`problems`]: test objectives with exact gradients and smoothness metadata,
//! * [`optimizers`]: the NGN family plus SGDM and Adam,
//! * [`theory`]: closed-form convergence bounds and parameter helpers,
//! * [`run`]: the single-run driver,
//! * [`verify`]: numerical audits of the step-size lemmas.
#![no_std]

extern crate alloc;

pub mod error;
pub mod optimizers;
pub mod problems;
pub mod run;
pub mod sampling;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use optimizers::{
    ngn_gamma, precond_update, schedule_c, step, OptimizerKind, OptimizerSpec, OptimizerState, Schedule, StepReport,
};
pub use problems::{build_problem, ObjectiveMetadata, ProblemKind, ProblemSpec, StepSample, StochasticObjective};
pub use sampling::Batch;
pub use run::{run_from, run_once, RunBudget, RunRecord, RunStatus, RunTrace};
