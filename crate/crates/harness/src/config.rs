//! TOML sweep configuration.
//!
//! ```toml
//! [problem]
//! kind = "rosenbrock"          # least-squares, ridge-quadratic, rosenbrock,
//!                              # multimodal, polynomial, linear-regression
//! # dim, n_samples, r, seed, interpolating, data, scale, coeffs, x0
//!
//! [[optimizer]]                # one block per optimizer group
//! kind = "ngn-m"               # or kinds = ["ngn-m", "sgdm"]
//! # beta2, eps, wd_lambda, schedule, horizon, c_coord, coord_precond,
//! # precond_identity, dampening; c and beta override the grid
//!
//! [grid]
//! c = [1e-3, 1e-2, 1e-1]
//! beta = [0.9]
//! seeds = [0]
//! # x0 = { start = -20.0, stop = 20.0, count = 301 }
//!
//! [budget]
//! max_steps = 100000
//! # success_loss, diverge_loss, batch_size, full_loss_every
//!
//! [output]
//! # dir, summary, trajectories
//! ```
//!
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use ngn_core::optimizers::{OptimizerKind, OptimizerSpec};
use ngn_core::problems::ProblemKind;
use ngn_core::run::RunBudget;
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::sweep::{parse_schedule, OptimizerBlock, OutputConfig, ProblemConfig, SweepSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    optimizer: OneOrMany<RawOptimizer>,
    grid: RawGrid,
    budget: RawBudget,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    dim: Option<usize>,
    n_samples: Option<usize>,
    r: Option<f64>,
    seed: Option<u64>,
    interpolating: Option<bool>,
    data: Option<PathBuf>,
    scale: Option<f64>,
    coeffs: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    kind: Option<String>,
    kinds: Option<Vec<String>>,
    c: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    beta2: Option<f64>,
    eps: Option<f64>,
    wd_lambda: Option<f64>,
    schedule: Option<String>,
    horizon: Option<u64>,
    c_coord: Option<Vec<f64>>,
    coord_precond: Option<bool>,
    precond_identity: Option<bool>,
    dampening: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    c: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    seeds: Vec<u64>,
    x0: Option<Linspace>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Linspace {
    start: f64,
    stop: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    max_steps: u64,
    success_loss: Option<f64>,
    diverge_loss: Option<f64>,
    batch_size: Option<usize>,
    full_loss_every: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    summary: Option<String>,
    trajectories: Option<bool>,
}

pub fn parse_config(path: &Path) -> Result<SweepSpec> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text; relative data paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<SweepSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let budget = budget(&raw.budget)?;
    let blocks = match raw.optimizer {
        OneOrMany::One(b) => vec![b],
        OneOrMany::Many(bs) => bs,
    };
    let blocks = blocks
        .into_iter()
        .enumerate()
        .map(|(i, b)| block(i, b, &raw.grid, budget.max_steps))
        .collect::<Result<Vec<_>>>()?;
    let x0_grid = match &raw.grid.x0 {
        None => Vec::new(),
        Some(l) => linspace(l)?.into_iter().map(|v| vec![v]).collect(),
    };
    let output = OutputConfig {
        dir: raw.output.dir.unwrap_or_else(|| OutputConfig::default().dir),
        summary: raw.output.summary.unwrap_or_else(|| OutputConfig::default().summary),
        trajectories: raw.output.trajectories.unwrap_or(false),
    };
    let spec = SweepSpec {
        problem: problem(raw.problem, base)?,
        blocks,
        seeds: raw.grid.seeds,
        x0_grid,
        budget,
        output,
    };
    spec.validate()?;
    Ok(spec)
}

fn problem(raw: RawProblem, base: &Path) -> Result<ProblemConfig> {
    let kind: ProblemKind = raw.kind.parse()?;
    let allowed: &[&str] = match kind {
        ProblemKind::LeastSquares => &["dim", "n_samples", "seed", "interpolating"],
        ProblemKind::RidgeQuadratic => &["dim", "r", "seed"],
        ProblemKind::Rosenbrock | ProblemKind::Multimodal1D => &[],
        ProblemKind::Polynomial1D => &["scale", "coeffs"],
        ProblemKind::LinearRegressionData => &["data", "dim", "n_samples", "seed"],
    };
    let present = [
        ("dim", raw.dim.is_some()),
        ("n_samples", raw.n_samples.is_some()),
        ("r", raw.r.is_some()),
        ("seed", raw.seed.is_some()),
        ("interpolating", raw.interpolating.is_some()),
        ("data", raw.data.is_some()),
        ("scale", raw.scale.is_some()),
        ("coeffs", raw.coeffs.is_some()),
    ];
    for (key, set) in present {
        if set && !allowed.contains(&key) {
            return Err(HarnessError::Config(format!("problem.{key} does not apply to {kind}")));
        }
    }
    let mut cfg = ProblemConfig::new(kind);
    cfg.dim = raw.dim;
    cfg.n_samples = raw.n_samples;
    cfg.r = raw.r;
    cfg.seed = raw.seed;
    cfg.interpolating = raw.interpolating.unwrap_or(false);
    cfg.data = raw.data.map(|p| if p.is_relative() { base.join(p) } else { p });
    if let Some(s) = raw.scale {
        cfg.scale = s;
    }
    if let Some(c) = raw.coeffs {
        cfg.coeffs = c;
    }
    cfg.x0 = raw.x0;
    Ok(cfg)
}

fn block(i: usize, raw: RawOptimizer, grid: &RawGrid, max_steps: u64) -> Result<OptimizerBlock> {
    let names = match (raw.kind, raw.kinds) {
        (Some(k), None) => vec![k],
        (None, Some(ks)) => ks,
        _ => return Err(HarnessError::Config(format!("optimizer[{i}] needs exactly one of `kind` or `kinds`"))),
    };
    let kinds = names
        .iter()
        .map(|n| n.parse::<OptimizerKind>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut template = OptimizerSpec::new(kinds.first().copied().unwrap_or(OptimizerKind::Ngn), 1.0);
    if let Some(v) = raw.beta2 {
        template.beta2 = v;
    }
    if let Some(v) = raw.eps {
        template.eps = v;
    }
    if let Some(v) = raw.wd_lambda {
        template.wd_lambda = v;
    }
    if let Some(s) = &raw.schedule {
        template.schedule = parse_schedule(s, raw.horizon.unwrap_or(max_steps))?;
    } else if raw.horizon.is_some() {
        return Err(HarnessError::Config(format!("optimizer[{i}].horizon needs schedule = \"inv-sqrt-k\"")));
    }
    template.c_coord = raw.c_coord;
    template.coord_precond = raw.coord_precond.unwrap_or(false);
    template.precond_identity = raw.precond_identity.unwrap_or(false);
    template.dampening = raw.dampening;
    let c_grid = raw
        .c
        .or_else(|| grid.c.clone())
        .ok_or_else(|| HarnessError::Config(format!("grid.c is missing for optimizer[{i}]")))?;
    let beta_grid = raw.beta.or_else(|| grid.beta.clone()).unwrap_or_else(|| vec![0.9]);
    Ok(OptimizerBlock {
        kinds,
        template,
        c_grid,
        beta_grid,
    })
}

fn budget(raw: &RawBudget) -> Result<RunBudget> {
    let mut b = RunBudget::new(raw.max_steps);
    if let Some(v) = raw.success_loss {
        b.success_loss = v;
    }
    if let Some(v) = raw.diverge_loss {
        b.diverge_loss = v;
    }
    b.batch_size = raw.batch_size;
    if let Some(v) = raw.full_loss_every {
        b.full_loss_every = v;
    }
    b.validate()?;
    Ok(b)
}

fn linspace(l: &Linspace) -> Result<Vec<f64>> {
    if l.count < 2 || l.start.is_nan() || l.stop.is_nan() || l.start >= l.stop {
        return Err(HarnessError::Config("grid.x0 needs start < stop and count ≥ 2".into()));
    }
    let h = (l.stop - l.start) / (l.count - 1) as f64;
    Ok((0..l.count).map(|i| l.start + h * i as f64).collect())
}
