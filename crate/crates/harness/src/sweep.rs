//! Hyperparameter grids over one problem, run cell by cell.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ngn_core::optimizers::{OptimizerKind, OptimizerSpec, Schedule};
use ngn_core::problems::{build_problem, ProblemKind, ProblemSpec, RegressionSource, StochasticObjective};
use ngn_core::run::{run_from, RunBudget, RunRecord, RunStatus};
use rayon::prelude::*;

use crate::data::load_regression_csv;
use crate::error::{HarnessError, Result};

/// Problem descriptor as configured; seeded problems without an explicit
/// seed take the cell seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub dim: Option<usize>,
    pub n_samples: Option<usize>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub interpolating: bool,
    pub data: Option<PathBuf>,
    pub scale: f64,
    pub coeffs: Vec<f64>,
    pub x0: Option<Vec<f64>>,
}

impl ProblemConfig {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            dim: None,
            n_samples: None,
            r: None,
            seed: None,
            interpolating: false,
            data: None,
            scale: 1.0,
            coeffs: vec![0.0, 1.0],
            x0: None,
        }
    }

    /// Whether the problem data depends on a seed.
    pub fn is_seeded(&self) -> bool {
        match self.kind {
            ProblemKind::LeastSquares | ProblemKind::RidgeQuadratic => true,
            ProblemKind::LinearRegressionData => self.data.is_none(),
            _ => false,
        }
    }

    pub fn problem_seed(&self, cell_seed: u64) -> Option<u64> {
        self.is_seeded().then(|| self.seed.unwrap_or(cell_seed))
    }

    pub fn to_spec(&self, cell_seed: u64) -> Result<ProblemSpec> {
        let seed = self.seed.unwrap_or(cell_seed);
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| HarnessError::Config(format!("problem.{key} is required for {}", self.kind)));
        Ok(match self.kind {
            ProblemKind::LeastSquares => {
                ProblemSpec::random_least_squares(need(self.n_samples, "n_samples")?, need(self.dim, "dim")?, seed, self.interpolating)
            }
            ProblemKind::RidgeQuadratic => ProblemSpec::RidgeQuadratic {
                dim: self.dim.unwrap_or(400),
                r: self.r.ok_or_else(|| HarnessError::Config("problem.r is required for ridge-quadratic".into()))?,
                seed,
            },
            ProblemKind::Rosenbrock => ProblemSpec::Rosenbrock,
            ProblemKind::Multimodal1D => ProblemSpec::Multimodal1D,
            ProblemKind::Polynomial1D => ProblemSpec::Polynomial1D {
                scale: self.scale,
                coeffs: self.coeffs.clone(),
            },
            ProblemKind::LinearRegressionData => ProblemSpec::LinearRegression(match &self.data {
                Some(path) => load_regression_csv(path)?,
                None => match (self.n_samples, self.dim) {
                    (None, None) => RegressionSource::diabetes_shaped(seed),
                    (n, d) => RegressionSource::Synthetic {
                        n_samples: need(n, "n_samples")?,
                        dim: need(d, "dim")?,
                        seed,
                    },
                },
            }),
        })
    }

    pub fn build(&self, cell_seed: u64) -> Result<StochasticObjective> {
        let problem = build_problem(&self.to_spec(cell_seed)?)?;
        match &self.x0 {
            Some(x0) => Ok(problem.with_initial_point(x0.clone())?),
            None => Ok(problem),
        }
    }
}

/// One optimizer block: a hyperparameter template and its own grids.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerBlock {
    pub kinds: Vec<OptimizerKind>,
    /// Hyperparameters other than the kind, `c` and `β`.
    pub template: OptimizerSpec,
    pub c_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub summary: String,
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            summary: "summary.csv".into(),
            trajectories: false,
        }
    }
}

/// Environment variable that overrides [`OutputConfig::dir`].
pub const OUT_DIR_ENV: &str = "NGN_OUT_DIR";

impl OutputConfig {
    pub fn resolved_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.dir.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub problem: ProblemConfig,
    pub blocks: Vec<OptimizerBlock>,
    pub seeds: Vec<u64>,
    /// Initial points to sweep; empty means the problem default.
    pub x0_grid: Vec<Vec<f64>>,
    pub budget: RunBudget,
    pub output: OutputConfig,
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub spec: OptimizerSpec,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(HarnessError::Config("at least one [[optimizer]] block is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("grid.seeds is empty".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kinds.is_empty() {
                return Err(HarnessError::Config(format!("optimizer[{i}].kind is empty")));
            }
            if b.c_grid.is_empty() {
                return Err(HarnessError::Config(format!("grid.c is empty for optimizer[{i}]")));
            }
            if b.beta_grid.is_empty() {
                return Err(HarnessError::Config(format!("grid.beta is empty for optimizer[{i}]")));
            }
        }
        self.budget.validate()?;
        // Dimension checks happen per run, once the problem is built.
        for cell in self.cells() {
            cell.spec.validate(cell.spec.c_coord.as_ref().map_or(0, Vec::len))?;
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        let x0 = self.x0_grid.len().max(1);
        self.blocks
            .iter()
            .map(|b| b.kinds.len() * b.c_grid.len() * b.beta_grid.len() * x0 * self.seeds.len())
            .sum()
    }

    /// Cells in their fixed order: block, kind, c, β, x⁰, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.cell_count());
        let x0s: Vec<Option<Vec<f64>>> = if self.x0_grid.is_empty() {
            vec![None]
        } else {
            self.x0_grid.iter().cloned().map(Some).collect()
        };
        for block in &self.blocks {
            for &kind in &block.kinds {
                for &c in &block.c_grid {
                    for &beta in &block.beta_grid {
                        for x0 in &x0s {
                            for &seed in &self.seeds {
                                let mut spec = block.template.clone();
                                spec.kind = kind;
                                spec.c = c;
                                spec.beta1 = beta;
                                out.push(Cell {
                                    index: out.len(),
                                    spec,
                                    seed,
                                    x0: x0.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Aggregate of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub status: RunStatus,
    pub final_loss: f64,
    pub best_loss: f64,
    pub steps_to_success: Option<u64>,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    /// Failures are recorded per cell and never abort the sweep.
    pub outcome: std::result::Result<CellOutcome, String>,
    /// Kept only when trajectories are requested.
    pub record: Option<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
}

fn run_cell(problem: &std::result::Result<StochasticObjective, String>, cell: &Cell, budget: &RunBudget, keep: bool) -> CellResult {
    let run = problem.as_ref().map_err(Clone::clone).and_then(|p| {
        let x0 = cell.x0.clone().unwrap_or_else(|| p.initial_point().to_vec());
        run_from(p, &cell.spec, budget, cell.seed, x0).map_err(|e| e.to_string())
    });
    match run {
        Ok(rec) => CellResult {
            cell: cell.clone(),
            outcome: Ok(CellOutcome {
                status: rec.status,
                final_loss: rec.final_loss,
                best_loss: rec.best_loss(),
                steps_to_success: rec.status.steps_to_success(),
                x0: rec.x0.clone(),
                final_x: rec.final_x.clone(),
            }),
            record: keep.then_some(rec),
        },
        Err(e) => CellResult {
            cell: cell.clone(),
            outcome: Err(e),
            record: None,
        },
    }
}

/// Runs every cell. With `parallel` set the cells are spread over the rayon
/// pool; results are identical either way and ordered by cell index.
pub fn run_sweep(sweep: &SweepSpec, parallel: bool) -> Result<SweepResult> {
    sweep.validate()?;
    let cells = sweep.cells();
    let mut problems: BTreeMap<Option<u64>, std::result::Result<StochasticObjective, String>> = BTreeMap::new();
    for cell in &cells {
        let key = sweep.problem.problem_seed(cell.seed);
        problems
            .entry(key)
            .or_insert_with(|| sweep.problem.build(cell.seed).map_err(|e| e.to_string()));
    }
    let keep = sweep.output.trajectories;
    let go = |cell: &Cell| run_cell(&problems[&sweep.problem.problem_seed(cell.seed)], cell, &sweep.budget, keep);
    let results = if parallel {
        cells.par_iter().map(go).collect()
    } else {
        cells.iter().map(go).collect()
    };
    Ok(SweepResult { cells: results })
}

pub fn parse_schedule(name: &str, horizon: u64) -> Result<Schedule> {
    match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "constant" => Ok(Schedule::Constant),
        "inv-sqrt-k" => Ok(Schedule::InvSqrtK(horizon)),
        "inv-sqrt-step" | "inv-sqrt-k1" => Ok(Schedule::InvSqrtStep),
        other => Err(HarnessError::Config(format!("unknown schedule `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kinds: Vec<OptimizerKind>, cs: Vec<f64>, seeds: Vec<u64>) -> SweepSpec {
        SweepSpec {
            problem: ProblemConfig::new(ProblemKind::Polynomial1D),
            blocks: vec![OptimizerBlock {
                kinds,
                template: OptimizerSpec::new(OptimizerKind::Ngn, 1.0),
                c_grid: cs,
                beta_grid: vec![0.9],
            }],
            seeds,
            x0_grid: vec![],
            budget: RunBudget::new(2_000),
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn cell_count_matches_grid() {
        let s = spec(
            vec![OptimizerKind::NgnMV1, OptimizerKind::Sgdm],
            (-4..=4).map(|e| 10f64.powi(e)).collect(),
            vec![0, 1, 2],
        );
        assert_eq!(s.cell_count(), 54);
        let r = run_sweep(&s, true).unwrap();
        assert_eq!(r.cells.len(), 54);
        assert!(r.cells.iter().enumerate().all(|(i, c)| c.cell.index == i));
    }

    #[test]
    fn parallel_equals_serial() {
        let s = spec(vec![OptimizerKind::NgnMV1, OptimizerKind::Adam], vec![0.01, 1.0, 100.0], vec![0, 5]);
        assert_eq!(run_sweep(&s, true).unwrap(), run_sweep(&s, false).unwrap());
    }

    #[test]
    fn cell_failures_do_not_abort() {
        let mut s = spec(vec![OptimizerKind::NgnMV1], vec![1.0], vec![0]);
        s.x0_grid = vec![vec![1.0], vec![1.0, 2.0]];
        let r = run_sweep(&s, false).unwrap();
        assert!(r.cells[0].outcome.is_ok());
        assert!(r.cells[1].outcome.is_err());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let s = spec(vec![OptimizerKind::NgnMV1], vec![], vec![0]);
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("grid.c"), "{err}");
    }
}
