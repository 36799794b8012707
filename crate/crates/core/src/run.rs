//! Single-run driver: sampling, stopping rules and per-step recording.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::optimizers::{step, OptimizerSpec, OptimizerState, StepReport};
use crate::problems::{StepSample, StochasticObjective};
use crate::sampling::Batch;

/// Stopping rules and batch configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBudget {
    pub max_steps: u64,
    /// Stop as converged once the recorded loss is at or below this value.
    pub success_loss: f64,
    /// Stop as diverged once the recorded loss exceeds this value.
    pub diverge_loss: f64,
    /// `None` runs full-batch.
    pub batch_size: Option<usize>,
    /// Full-batch loss cadence for stochastic runs (0 disables it).
    pub full_loss_every: u64,
    /// Keep iterates, gradients and per-coordinate step-sizes.
    pub keep_trace: bool,
}

impl RunBudget {
    pub fn new(max_steps: u64) -> Self {
        Self {
            max_steps,
            success_loss: 1e-15,
            diverge_loss: 1e10,
            batch_size: None,
            full_loss_every: 10,
            keep_trace: false,
        }
    }

    pub fn with_success(mut self, success_loss: f64) -> Self {
        self.success_loss = success_loss;
        self
    }

    /// Never stops early on a small loss.
    pub fn without_success(mut self) -> Self {
        self.success_loss = f64::NEG_INFINITY;
        self
    }

    pub fn with_divergence(mut self, diverge_loss: f64) -> Self {
        self.diverge_loss = diverge_loss;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = Some(batch_size);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.keep_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        if self.success_loss.is_nan() || self.diverge_loss.is_nan() || self.success_loss >= self.diverge_loss {
            return Err(invalid("success_loss", "must be below diverge_loss"));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    /// Loss reached `success_loss` at this step index.
    Converged(u64),
    /// Loss exceeded `diverge_loss` or became non-finite at this step index.
    Diverged(u64),
    BudgetExhausted,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Converged(_) => "converged",
            RunStatus::Diverged(_) => "diverged",
            RunStatus::BudgetExhausted => "budget-exhausted",
        }
    }

    pub fn is_diverged(self) -> bool {
        matches!(self, RunStatus::Diverged(_))
    }

    pub fn steps_to_success(self) -> Option<u64> {
        match self {
            RunStatus::Converged(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-step data kept when [`RunBudget::keep_trace`] is set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    /// `x⁰, x¹, …` including the final iterate.
    pub iterates: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
    pub coord_gammas: Vec<Vec<f64>>,
    pub batches: Vec<Batch>,
}

/// Outcome of one run. `losses[k]` is the batch loss at `x^k`; a run that
/// stops on a threshold records the terminal loss without stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub losses: Vec<f64>,
    /// Full-batch loss at `x^k` when evaluated.
    pub full_losses: Vec<Option<f64>>,
    pub grad_norms: Vec<f64>,
    pub step_reports: Vec<StepReport>,
    pub status: RunStatus,
    pub spec: OptimizerSpec,
    pub budget: RunBudget,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
    /// Full-batch loss at `final_x` (`NaN` if it could not be evaluated).
    pub final_loss: f64,
    pub trace: Option<RunTrace>,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.step_reports.len()
    }

    pub fn best_loss(&self) -> f64 {
        self.losses
            .iter()
            .chain(core::iter::once(&self.final_loss))
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn run_once(problem: &StochasticObjective, spec: &OptimizerSpec, budget: &RunBudget, seed: u64) -> Result<RunRecord> {
    run_from(problem, spec, budget, seed, problem.initial_point().to_vec())
}

pub fn run_from(
    problem: &StochasticObjective,
    spec: &OptimizerSpec,
    budget: &RunBudget,
    seed: u64,
    x0: Vec<f64>,
) -> Result<RunRecord> {
    spec.validate(problem.dim())?;
    budget.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: problem.dim(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }
    let n = problem.n_samples();
    let stochastic = match budget.batch_size {
        Some(b) if b > n => return Err(Error::BatchTooLarge { requested: b, available: n }),
        Some(b) => b < n,
        None => false,
    };
    let full = problem.full_batch();
    let cap = budget.max_steps.min(1 << 20) as usize;
    let mut rec = RunRecord {
        losses: Vec::with_capacity(cap),
        full_losses: Vec::with_capacity(cap),
        grad_norms: Vec::with_capacity(cap),
        step_reports: Vec::with_capacity(cap),
        status: RunStatus::BudgetExhausted,
        spec: spec.clone(),
        budget: budget.clone(),
        seed,
        x0: x0.clone(),
        final_x: Vec::new(),
        final_loss: f64::NAN,
        trace: budget.keep_trace.then(RunTrace::default),
    };
    let mut state = OptimizerState::new(x0);
    let mut sample = StepSample {
        loss: 0.0,
        grad: vec![0.0; problem.dim()],
        batch: full.clone(),
    };
    for k in 0..budget.max_steps {
        if stochastic {
            sample.batch = problem.sample_batch(seed, k, budget.batch_size.unwrap_or(n))?;
        }
        let loss = match problem.eval_into(&state.x, &sample.batch, &mut sample.grad) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        sample.loss = loss;
        let grad_norm = libm::sqrt(sample.grad.iter().map(|g| g * g).sum::<f64>());
        let full_loss = if !stochastic {
            Some(loss)
        } else if budget.full_loss_every > 0 && k % budget.full_loss_every == 0 && loss.is_finite() {
            problem.full_loss(&state.x).ok()
        } else {
            None
        };
        rec.losses.push(loss);
        rec.full_losses.push(full_loss);
        rec.grad_norms.push(grad_norm);
        if !loss.is_finite() || loss > budget.diverge_loss || !grad_norm.is_finite() {
            rec.status = RunStatus::Diverged(k);
            break;
        }
        if loss <= budget.success_loss {
            rec.status = RunStatus::Converged(k);
            break;
        }
        if let Some(t) = rec.trace.as_mut() {
            t.iterates.push(state.x.clone());
            t.grads.push(sample.grad.clone());
            t.batches.push(sample.batch.clone());
        }
        let report = step(&mut state, &sample, spec)?;
        rec.step_reports.push(report);
        if let Some(t) = rec.trace.as_mut() {
            t.coord_gammas.push(state.coord_gammas().to_vec());
        }
    }
    if let Some(t) = rec.trace.as_mut() {
        t.iterates.push(state.x.clone());
    }
    rec.final_loss = match rec.status {
        RunStatus::Diverged(_) => rec.losses.last().copied().unwrap_or(f64::NAN),
        _ => problem.full_loss(&state.x).unwrap_or(f64::NAN),
    };
    rec.final_x = state.x;
    Ok(rec)
}
