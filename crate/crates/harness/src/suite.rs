//! The standard audit suite run by `ngn verify`.

use ngn_core::optimizers::{OptimizerKind, OptimizerSpec};
use ngn_core::problems::{build_problem, ProblemSpec, RegressionSource, StochasticObjective};
use ngn_core::run::{run_once, RunBudget};
use ngn_core::verify::{
    audit_fundamental_equality, audit_gradients, audit_ima_equivalence, audit_reductions, audit_stepsize_bounds,
    audit_theorem_bound, audit_theorem_bound_decaying, audit_weight_decay_clamp, AuditReport, Smoothness,
};
use ngn_core::Result;
use rayon::prelude::*;

pub const THEOREM_DIMS: [usize; 3] = [5, 20, 50];
pub const THEOREM_SEEDS: u64 = 10;
pub const THEOREM_K: u64 = 10_000;
pub const IMA_BETAS: [f64; 3] = [0.1, 0.5, 0.9];

fn named(mut r: AuditReport, suffix: &str) -> AuditReport {
    r.name = format!("{}[{suffix}]", r.name);
    r
}

fn budget(steps: u64, batch: usize) -> RunBudget {
    RunBudget::new(steps)
        .without_success()
        .with_divergence(f64::INFINITY)
        .with_batch_size(batch)
        .with_trace()
}

/// Random least squares used by the step-size audits: `d ≤ 100`, `n = 3d`.
pub fn stepsize_problem(seed: u64) -> Result<StochasticObjective> {
    let d = 5 + (seed as usize * 11) % 96;
    build_problem(&ProblemSpec::random_least_squares(3 * d, d, seed, false))
}

/// Scalar NGN and per-coordinate NGN-D bounds, `steps` steps per seed,
/// checked against the batch smoothness bounds.
pub fn stepsize_audits(seeds: u64, steps: u64) -> Result<Vec<AuditReport>> {
    (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let p = stepsize_problem(seed)?;
            let c = 10f64.powi(seed as i32 % 5 - 2);
            let b = budget(steps, 4);
            let l = p.batch_smoothness_bound().ok_or(ngn_core::Error::MissingMetadata("smoothness"))?;
            let ls = p
                .batch_coord_smoothness_bound()
                .ok_or(ngn_core::Error::MissingMetadata("coord_smoothness"))?;
            let scalar = run_once(&p, &OptimizerSpec::new(OptimizerKind::Ngn, c), &b, seed)?;
            let coord = run_once(&p, &OptimizerSpec::new(OptimizerKind::NgnD, c), &b, seed)?;
            let tag = format!("seed={seed}");
            Ok(vec![
                named(audit_stepsize_bounds(&scalar, &Smoothness::Scalar(l))?, &tag),
                named(audit_stepsize_bounds(&coord, &Smoothness::Coord(ls))?, &tag),
            ])
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

pub fn fundamental_equality_audit(steps: u64) -> Result<AuditReport> {
    let p = build_problem(&ProblemSpec::random_least_squares(60, 12, 3, false))?;
    let run = run_once(&p, &OptimizerSpec::new(OptimizerKind::NgnD, 0.5), &budget(steps, 5), 3)?;
    audit_fundamental_equality(&run)
}

pub fn ima_audits(steps: u64) -> Result<Vec<AuditReport>> {
    let p = build_problem(&ProblemSpec::random_least_squares(40, 8, 4, false))?;
    IMA_BETAS
        .iter()
        .map(|&beta| {
            let spec = OptimizerSpec::new(OptimizerKind::NgnMV1, 0.2).with_beta(beta);
            audit_ima_equivalence(&p, &spec, steps, 4, Some(5)).map(|r| named(r, &format!("beta={beta}")))
        })
        .collect()
}

pub fn reduction_audits(steps: u64) -> Result<Vec<AuditReport>> {
    let p = build_problem(&ProblemSpec::random_least_squares(40, 8, 5, false))?;
    audit_reductions(&p, 0.3, steps, 5, Some(5))
}

/// Interpolating full-batch quadratic for the convergence-bound audits.
pub fn theorem_problem(dim: usize, seed: u64) -> Result<StochasticObjective> {
    build_problem(&ProblemSpec::random_least_squares(2 * dim, dim, seed, true))
}

pub fn theorem_audits(k: u64, seeds: u64) -> Result<Vec<AuditReport>> {
    let jobs: Vec<(usize, u64, bool)> = THEOREM_DIMS
        .iter()
        .flat_map(|&d| (0..seeds).flat_map(move |s| [(d, s, false), (d, s, true)]))
        .collect();
    jobs.into_par_iter()
        .map(|(d, seed, decaying)| {
            let p = theorem_problem(d, seed)?;
            let r = if decaying {
                audit_theorem_bound_decaying(&p, k)?
            } else {
                audit_theorem_bound(&p, k)?
            };
            Ok(named(r, &format!("d={d};seed={seed}")))
        })
        .collect()
}

/// One instance of every problem family.
pub fn gradient_problems() -> Result<Vec<StochasticObjective>> {
    [
        ProblemSpec::random_least_squares(30, 6, 6, false),
        ProblemSpec::RidgeQuadratic { dim: 20, r: 0.1, seed: 6 },
        ProblemSpec::Rosenbrock,
        ProblemSpec::Multimodal1D,
        ProblemSpec::quartic(),
        ProblemSpec::Polynomial1D {
            scale: 0.5,
            coeffs: vec![1.0, -0.5, 0.25],
        },
        ProblemSpec::LinearRegression(RegressionSource::diabetes_shaped(6)),
    ]
    .iter()
    .map(build_problem)
    .collect()
}

pub fn gradient_audits(points: usize) -> Result<Vec<AuditReport>> {
    gradient_problems()?
        .par_iter()
        .enumerate()
        .map(|(i, p)| audit_gradients(p, points, 100 + i as u64))
        .collect()
}

/// Every audit at its standard size.
pub fn standard_suite() -> Result<Vec<AuditReport>> {
    let mut out = stepsize_audits(10, 1000)?;
    out.push(fundamental_equality_audit(1000)?);
    out.extend(ima_audits(100)?);
    out.extend(reduction_audits(100)?);
    out.extend(theorem_audits(THEOREM_K, THEOREM_SEEDS)?);
    out.extend(gradient_audits(100)?);
    out.push(audit_weight_decay_clamp(1000, 7)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let mut reports = stepsize_audits(2, 100).unwrap();
        reports.push(fundamental_equality_audit(100).unwrap());
        reports.extend(ima_audits(20).unwrap());
        reports.extend(reduction_audits(20).unwrap());
        reports.extend(gradient_audits(5).unwrap());
        for r in &reports {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(reports.len(), 4 + 1 + 3 + 5 + 7);
    }

    #[test]
    fn stepsize_problems_stay_small() {
        for s in 0..10 {
            assert!(stepsize_problem(s).unwrap().dim() <= 100);
        }
    }
}
