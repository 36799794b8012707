//! Executable checks of the step-size lemmas, the IMA reformulation,
//! parameter collapses and the convergence bounds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::optimizers::{ngn_gamma, schedule_c, step, OptimizerKind, OptimizerSpec, OptimizerState, Schedule};
use crate::problems::{finite_diff_grad, multimodal, ProblemKind, StepSample, StochasticObjective};
use crate::run::{run_once, RunBudget, RunRecord};
use crate::sampling::Batch;
use crate::theory::{decaying_weights, ngn_m_bound, ngn_m_bound_decaying, ngn_m_params, TheoryInputs};

/// Where the worst residual of an audit occurred.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditLocation {
    pub step: Option<u64>,
    pub coord: Option<usize>,
}

impl fmt::Display for AuditLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.step, self.coord) {
            (Some(s), Some(c)) => write!(f, "step={s};coord={c}"),
            (Some(s), None) => write!(f, "step={s}"),
            (None, Some(c)) => write!(f, "coord={c}"),
            (None, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub location: AuditLocation,
}

impl AuditReport {
    fn new(name: &str, max_violation: f64, tolerance: f64, location: AuditLocation) -> Self {
        Self {
            name: name.to_string(),
            passed: max_violation <= tolerance,
            max_violation,
            tolerance,
            location,
        }
    }
}

/// Running maximum with its location. NaN counts as an infinite violation.
#[derive(Default)]
struct Worst {
    value: f64,
    at: AuditLocation,
}

impl Worst {
    fn see(&mut self, v: f64, step: Option<u64>, coord: Option<usize>) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.value {
            self.value = v;
            self.at = AuditLocation { step, coord };
        }
    }
}

fn need_trace(run: &RunRecord) -> Result<&crate::run::RunTrace> {
    run.trace
        .as_ref()
        .ok_or_else(|| Error::Precondition("audit needs a run recorded with keep_trace".into()))
}

fn current_c(spec: &OptimizerSpec, k: u64) -> Result<f64> {
    schedule_c(spec.schedule, spec.c, k)
}

/// Smoothness constants to check the step-sizes against.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoothness {
    Scalar(f64),
    Coord(Vec<f64>),
}

/// Every recorded step-size lies in `[c/(1 + cL), c]` (scalar) or
/// `[c_j/(1 + c_jL_j), c_j]` (per coordinate), up to `1e-12·c`.
pub fn audit_stepsize_bounds(run: &RunRecord, smoothness: &Smoothness) -> Result<AuditReport> {
    let spec = &run.spec;
    let mut worst = Worst::default();
    match smoothness {
        Smoothness::Scalar(l) => {
            if !(l.is_finite() && *l > 0.0) {
                return Err(Error::MissingMetadata("smoothness"));
            }
            for (k, r) in run.step_reports.iter().enumerate() {
                let c = current_c(spec, k as u64)?;
                let lo = c / (1.0 + c * l);
                let g = r.gamma_scalar;
                worst.see(((lo - g).max(g - c)) / c, Some(k as u64), None);
            }
            Ok(AuditReport::new("stepsize-bounds", worst.value, 1e-12, worst.at))
        }
        Smoothness::Coord(ls) => {
            if spec.coord_precond {
                return Err(Error::Precondition("coordinate bounds need fixed c_j".into()));
            }
            let trace = need_trace(run)?;
            for (k, gammas) in trace.coord_gammas.iter().enumerate() {
                if gammas.len() != ls.len() {
                    return Err(Error::DimensionMismatch {
                        what: "coordinate smoothness",
                        expected: gammas.len(),
                        found: ls.len(),
                    });
                }
                for (j, (&g, &l)) in gammas.iter().zip(ls).enumerate() {
                    let c = coord_c(spec, j, k as u64)?;
                    let lo = c / (1.0 + c * l);
                    worst.see(((lo - g).max(g - c)) / c, Some(k as u64), Some(j));
                }
            }
            Ok(AuditReport::new("stepsize-bounds-coord", worst.value, 1e-12, worst.at))
        }
    }
}

fn coord_c(spec: &OptimizerSpec, j: usize, k: u64) -> Result<f64> {
    match &spec.c_coord {
        Some(cs) => schedule_c(spec.schedule, cs[j], k),
        None => current_c(spec, k),
    }
}

/// `γ_j g_j² = 2((c_j − γ_j)/c_j) f_S` at every step and coordinate of an
/// NGN-D run, relative to `f_S`.
pub fn audit_fundamental_equality(run: &RunRecord) -> Result<AuditReport> {
    let spec = &run.spec;
    if spec.kind != OptimizerKind::NgnD || spec.coord_precond {
        return Err(Error::Precondition("fundamental equality applies to NGN-D with fixed c_j".into()));
    }
    let trace = need_trace(run)?;
    let mut worst = Worst::default();
    for (k, (gammas, grad)) in trace.coord_gammas.iter().zip(&trace.grads).enumerate() {
        let f = run.losses[k];
        for (j, (&g, &gj)) in gammas.iter().zip(grad).enumerate() {
            let c = coord_c(spec, j, k as u64)?;
            let lhs = g * gj * gj;
            let rhs = 2.0 * ((c - g) / c) * f;
            let scale = if f > 0.0 { f } else { 1.0 };
            worst.see((lhs - rhs).abs() / scale, Some(k as u64), Some(j));
        }
    }
    Ok(AuditReport::new("fundamental-equality", worst.value, 1e-12, worst.at))
}

/// Runs heavy-ball NGN-M next to its iterate-moving-average form
/// `z' = z − γ g(x)`, `x' = (λx + z')/(1 + λ)` with `λ = β/(1 − β)` on the
/// same batches, and reports the largest deviation of the iterates and of
/// `z^k = x^k + λ(x^k − x^{k−1})`.
pub fn audit_ima_equivalence(
    problem: &StochasticObjective,
    spec: &OptimizerSpec,
    steps: u64,
    seed: u64,
    batch_size: Option<usize>,
) -> Result<AuditReport> {
    if spec.kind != OptimizerKind::NgnMV1 {
        return Err(invalid("kind", "IMA audit needs NGN-M Ver.1"));
    }
    spec.validate(problem.dim())?;
    let beta = spec.beta1;
    let lambda = beta / (1.0 - beta);
    let full = problem.full_batch();
    let batch_at = |k: u64| -> Result<Batch> {
        match batch_size {
            Some(b) if b < problem.n_samples() => problem.sample_batch(seed, k, b),
            _ => Ok(full.clone()),
        }
    };
    let mut hb = OptimizerState::new(problem.initial_point().to_vec());
    let mut x = problem.initial_point().to_vec();
    let mut z = x.clone();
    let mut worst = Worst::default();
    for k in 0..steps {
        let batch = batch_at(k)?;
        let s = problem.evaluate(&hb.x, &batch)?;
        step(&mut hb, &s, spec)?;

        let t = problem.evaluate(&x, &batch)?;
        let gsq: f64 = t.grad.iter().map(|g| g * g).sum();
        let gamma = ngn_gamma(current_c(spec, k)?, t.loss, gsq)?;
        for j in 0..x.len() {
            z[j] -= gamma * t.grad[j];
            x[j] = (lambda * x[j] + z[j]) / (1.0 + lambda);
        }
        for j in 0..x.len() {
            worst.see((hb.x[j] - x[j]).abs(), Some(k + 1), Some(j));
            let z_hb = hb.x[j] + lambda * (hb.x[j] - hb.x_prev[j]);
            worst.see((z_hb - z[j]).abs(), Some(k + 1), Some(j));
        }
    }
    Ok(AuditReport::new("ima-equivalence", worst.value, 1e-10, worst.at))
}

/// The parameter collapses that must reproduce another rule bit-for-bit.
pub fn reduction_pairs(c: f64) -> Vec<(&'static str, OptimizerSpec, OptimizerSpec)> {
    vec![
        (
            "ngn-m(beta=0)=ngn",
            OptimizerSpec::new(OptimizerKind::NgnMV1, c).with_beta(0.0),
            OptimizerSpec::new(OptimizerKind::Ngn, c),
        ),
        (
            "ngn-md-v2(beta1=0,D=I)=ngn-d",
            OptimizerSpec::new(OptimizerKind::NgnMdV2, c).with_beta(0.0).with_identity_precond(),
            OptimizerSpec::new(OptimizerKind::NgnD, c),
        ),
        (
            "ngn-md-v1(D=I)=ngn-m",
            OptimizerSpec::new(OptimizerKind::NgnMdV1, c).with_identity_precond(),
            OptimizerSpec::new(OptimizerKind::NgnMV1, c),
        ),
        (
            "dec-ngn-md-v1(lambda=0)=ngn-md-v1",
            OptimizerSpec::new(OptimizerKind::DecNgnMdV1, c),
            OptimizerSpec::new(OptimizerKind::NgnMdV1, c),
        ),
        (
            "ngn-md-v1w(lambda=0)=ngn-md-v1",
            OptimizerSpec::new(OptimizerKind::NgnMdV1W, c),
            OptimizerSpec::new(OptimizerKind::NgnMdV1, c),
        ),
    ]
}

/// Runs every pair from [`reduction_pairs`] for `steps` steps and reports
/// the largest iterate difference; passing requires identical bits.
pub fn audit_reductions(
    problem: &StochasticObjective,
    c: f64,
    steps: u64,
    seed: u64,
    batch_size: Option<usize>,
) -> Result<Vec<AuditReport>> {
    let mut budget = RunBudget::new(steps).without_success().with_divergence(f64::INFINITY).with_trace();
    budget.batch_size = batch_size;
    let mut out = Vec::new();
    for (name, a, b) in reduction_pairs(c) {
        let ra = run_once(problem, &a, &budget, seed)?;
        let rb = run_once(problem, &b, &budget, seed)?;
        let (ta, tb) = (need_trace(&ra)?, need_trace(&rb)?);
        let mut worst = Worst::default();
        let mut identical = ta.iterates.len() == tb.iterates.len();
        for (k, (xa, xb)) in ta.iterates.iter().zip(&tb.iterates).enumerate() {
            for (j, (p, q)) in xa.iter().zip(xb).enumerate() {
                if p.to_bits() != q.to_bits() {
                    identical = false;
                    worst.see((p - q).abs().max(f64::MIN_POSITIVE), Some(k as u64), Some(j));
                }
            }
        }
        let mut report = AuditReport::new(&format!("reduction:{name}"), worst.value, 0.0, worst.at);
        report.passed = identical;
        out.push(report);
    }
    Ok(out)
}

fn theorem_setup(problem: &StochasticObjective) -> Result<(f64, f64, f64)> {
    if !problem.is_quadratic() {
        return Err(Error::Precondition("theorem audit needs a least-squares problem".into()));
    }
    let meta = problem.metadata();
    let l = meta.smoothness.ok_or(Error::MissingMetadata("smoothness"))?;
    let f_star = meta.f_star.ok_or(Error::MissingMetadata("f_star"))?;
    let x_star = meta.x_star.as_ref().ok_or(Error::MissingMetadata("x_star"))?;
    let dist0_sq = problem
        .initial_point()
        .iter()
        .zip(x_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((l, f_star, dist0_sq))
}

/// NGN-M with `c = 1/√K` and the largest admissible `β`, full batch: the
/// mean suboptimality over `x⁰ … x^{K−1}` stays below the constant-step
/// bound. `max_violation` is `mean − bound`.
pub fn audit_theorem_bound(problem: &StochasticObjective, k: u64) -> Result<AuditReport> {
    if k < 10 {
        return Err(invalid("K", "theorem audit needs K ≥ 10"));
    }
    let (l, f_star, dist0_sq) = theorem_setup(problem)?;
    let c = schedule_c(Schedule::InvSqrtK(k), 1.0, 0)?;
    let params = ngn_m_params(c, l)?;
    let spec = OptimizerSpec::new(OptimizerKind::NgnMV1, 1.0)
        .with_schedule(Schedule::InvSqrtK(k))
        .with_beta(params.beta_max);
    let budget = RunBudget::new(k).without_success().with_divergence(f64::INFINITY);
    let run = run_once(problem, &spec, &budget, 0)?;
    if run.losses.len() as u64 != k {
        return Err(Error::Precondition("run stopped early".into()));
    }
    let mean = run.losses.iter().map(|f| f - f_star).sum::<f64>() / k as f64;
    let bound = ngn_m_bound(&TheoryInputs::new(c, l, k, dist0_sq))?;
    Ok(AuditReport::new("theorem-bound", mean - bound, 0.0, AuditLocation::default()))
}

/// Decaying-step analogue: `c_k = 1/√(k+1)`, constant `λ` admissible at
/// every step, and the `ρ_k`-weighted average iterate against its bound.
pub fn audit_theorem_bound_decaying(problem: &StochasticObjective, k: u64) -> Result<AuditReport> {
    if k < 10 {
        return Err(invalid("K", "theorem audit needs K ≥ 10"));
    }
    let (l, f_star, dist0_sq) = theorem_setup(problem)?;
    let c0 = 1.0;
    let c_last = schedule_c(Schedule::InvSqrtStep, c0, k - 1)?;
    let lambda = (c_last * l).min(0.5 / ((1.0 + c0 * l) * (1.0 + 2.0 * c0 * l)));
    let spec = OptimizerSpec::new(OptimizerKind::NgnMV1, c0)
        .with_schedule(Schedule::InvSqrtStep)
        .with_beta(lambda / (1.0 + lambda));
    let budget = RunBudget::new(k).without_success().with_divergence(f64::INFINITY).with_trace();
    let run = run_once(problem, &spec, &budget, 0)?;
    let trace = need_trace(&run)?;
    let weights = decaying_weights(c0, l, k)?;
    let mut avg = vec![0.0; problem.dim()];
    for (w, x) in weights.iter().zip(&trace.iterates) {
        for (a, v) in avg.iter_mut().zip(x) {
            *a += w * v;
        }
    }
    let gap = problem.full_loss(&avg)? - f_star;
    let bound = ngn_m_bound_decaying(c0, l, k, dist0_sq, 0.0, 0.0)?;
    Ok(AuditReport::new("theorem-bound-decaying", gap - bound, 0.0, AuditLocation::default()))
}

fn random_point(problem: &StochasticObjective, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = problem.dim();
    match problem.kind() {
        ProblemKind::Rosenbrock => (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        ProblemKind::Multimodal1D => vec![rng.random_range(-20.0..20.0)],
        ProblemKind::Polynomial1D => vec![rng.random_range(-3.0..3.0)],
        _ => (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

/// Central-difference check of the gradient oracle at `points` random
/// points, each on the full batch and on a random batch. The error is
/// `‖g − g_fd‖∞ / max(‖g‖∞, 1)`.
pub fn audit_gradients(problem: &StochasticObjective, points: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.n_samples();
    let mut worst = Worst::default();
    for p in 0..points {
        let x = random_point(problem, &mut rng);
        let mut batches = vec![problem.full_batch()];
        if n > 1 {
            batches.push(problem.sample_batch(seed, p as u64, (n / 4).max(1))?);
        }
        for batch in &batches {
            let s = problem.evaluate(&x, batch)?;
            let h = 1e-6 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let fd = finite_diff_grad(problem, &x, batch, h)?;
            let scale = s.grad.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (j, (g, f)) in s.grad.iter().zip(&fd).enumerate() {
                worst.see((g - f).abs() / scale, Some(p as u64), Some(j));
            }
        }
    }
    Ok(AuditReport::new(&format!("gradients:{}", problem.kind()), worst.value, 1e-5, worst.at))
}

/// Coupled weight decay with `1 − (cλ/2f)gᵀx < 0` must apply a pure shrink
/// `x/(1 + λc)` plus momentum. Checks `trials` random configurations.
pub fn audit_weight_decay_clamp(trials: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for t in 0..trials {
        let d = rng.random_range(1..6);
        let c = libm::pow(10.0, rng.random_range(-2.0..2.0));
        let lambda = libm::pow(10.0, rng.random_range(-3.0..0.0));
        let beta = rng.random_range(0.0..0.95);
        let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x_prev: Vec<f64> = x.iter().map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        // g = s·x makes gᵀx = s‖x‖²; pick f so that cλgᵀx/(2f) ≥ 2.
        let s = rng.random_range(0.5..3.0);
        let grad: Vec<f64> = x.iter().map(|v| s * v).collect();
        let loss = c * lambda * s * xx / (4.0 * rng.random_range(1.0..10.0));
        let spec = OptimizerSpec::new(OptimizerKind::NgnMdV1W, c)
            .with_beta(beta)
            .with_weight_decay(lambda);
        let mut state = OptimizerState::new(x.clone());
        state.x_prev = x_prev.clone();
        let sample = StepSample {
            loss,
            grad,
            batch: Batch::full(1),
        };
        let report = step(&mut state, &sample, &spec)?;
        worst.see(report.gamma_scalar.abs(), Some(t as u64), None);
        for j in 0..d {
            let want = x[j] / (1.0 + lambda * c) + beta * (x[j] - x_prev[j]);
            worst.see((state.x[j] - want).abs(), Some(t as u64), Some(j));
        }
    }
    Ok(AuditReport::new("weight-decay-clamp", worst.value, 0.0, worst.at))
}

/// Global minimizer of the multimodal test function and the interval of
/// its basin, delimited by the nearest local maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basin {
    pub x_min: f64,
    pub f_min: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Basin {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// Dense grid scan of the multimodal function over `[lo, hi]`.
pub fn multimodal_global_basin(lo: f64, hi: f64, points: usize) -> Result<Basin> {
    if lo.is_nan() || hi.is_nan() || lo >= hi || points < 3 {
        return Err(invalid("grid", "needs lo < hi and at least 3 points"));
    }
    let h = (hi - lo) / (points - 1) as f64;
    let f: Vec<f64> = (0..points).map(|i| multimodal(lo + h * i as f64).0).collect();
    let best = (0..points).fold(0, |b, i| if f[i] < f[b] { i } else { b });
    let mut left = best;
    while left > 0 && f[left - 1] >= f[left] {
        left -= 1;
    }
    let mut right = best;
    while right + 1 < points && f[right + 1] >= f[right] {
        right += 1;
    }
    Ok(Basin {
        x_min: lo + h * best as f64,
        f_min: f[best],
        lo: lo + h * left as f64,
        hi: lo + h * right as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_problem, ProblemSpec};

    fn ls(n: usize, d: usize, seed: u64, interp: bool) -> StochasticObjective {
        build_problem(&ProblemSpec::random_least_squares(n, d, seed, interp)).unwrap()
    }

    #[test]
    fn fundamental_equality_by_hand() {
        let g = ngn_gamma(1.0, 2.0, 4.0).unwrap();
        assert_eq!(g * 4.0, 2.0 * ((1.0 - g) / 1.0) * 2.0);
    }

    #[test]
    fn ima_matches_heavy_ball() {
        let p = ls(30, 4, 1, false);
        for beta in [0.0, 0.5, 0.9] {
            let spec = OptimizerSpec::new(OptimizerKind::NgnMV1, 0.1).with_beta(beta);
            let r = audit_ima_equivalence(&p, &spec, 100, 3, Some(5)).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let spec = OptimizerSpec::new(OptimizerKind::Ngn, 0.1);
        assert!(audit_ima_equivalence(&p, &spec, 10, 3, None).is_err());
    }

    #[test]
    fn stepsize_and_equality_audits() {
        let p = ls(40, 6, 2, false);
        let l = p.batch_smoothness_bound().unwrap();
        let budget = RunBudget::new(300).with_batch_size(4).with_trace();
        let run = run_once(&p, &OptimizerSpec::new(OptimizerKind::NgnMV1, 2.0), &budget, 5).unwrap();
        assert!(audit_stepsize_bounds(&run, &Smoothness::Scalar(l)).unwrap().passed);
        // A too-small L must be caught.
        assert!(!audit_stepsize_bounds(&run, &Smoothness::Scalar(l * 1e-3)).unwrap().passed);

        let lc = p.batch_coord_smoothness_bound().unwrap();
        let run = run_once(&p, &OptimizerSpec::new(OptimizerKind::NgnD, 0.7), &budget, 5).unwrap();
        assert!(audit_stepsize_bounds(&run, &Smoothness::Coord(lc)).unwrap().passed);
        let r = audit_fundamental_equality(&run).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn reductions_hold() {
        let p = ls(20, 3, 4, false);
        for r in audit_reductions(&p, 0.5, 100, 1, Some(5)).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn theorem_audits_small() {
        let p = ls(10, 5, 9, true);
        assert!(audit_theorem_bound(&p, 2_000).unwrap().passed);
        assert!(audit_theorem_bound_decaying(&p, 2_000).unwrap().passed);
        assert!(audit_theorem_bound(&p, 5).is_err());
    }

    #[test]
    fn gradient_and_clamp_audits() {
        for spec in [ProblemSpec::Rosenbrock, ProblemSpec::Multimodal1D, ProblemSpec::quartic()] {
            let p = build_problem(&spec).unwrap();
            let r = audit_gradients(&p, 20, 1).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let r = audit_weight_decay_clamp(200, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn basin_oracle() {
        let b = multimodal_global_basin(-20.0, 20.0, 400_001).unwrap();
        assert!(b.x_min.abs() < 1e-3 && b.f_min < 1e-10);
        assert!((b.lo + 4.3487).abs() < 1e-3 && (b.hi - 0.2131).abs() < 1e-3, "{b:?}");
        assert!(b.contains(-1.0) && !b.contains(1.0));
    }
}
