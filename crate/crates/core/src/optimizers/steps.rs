use alloc::format;
use alloc::vec::Vec;

use super::{gamma, precond_in_place, OptimizerKind, OptimizerSpec, OptimizerState, StepReport};
use crate::error::{Error, Result};
use crate::problems::StepSample;

#[derive(Clone, Copy)]
enum Shrink {
    None,
    /// `x − t·x`
    Decoupled(f64),
    /// `x / t`
    Coupled(f64),
}

fn check(state: &OptimizerState, sample: &StepSample, spec: &OptimizerSpec, allowed: &[OptimizerKind]) -> Result<()> {
    if !allowed.contains(&spec.kind) {
        return Err(Error::Precondition(format!("update rule does not handle kind {}", spec.kind)));
    }
    if sample.grad.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            what: "gradient",
            expected: state.dim(),
            found: sample.grad.len(),
        });
    }
    if let Some(cs) = &spec.c_coord {
        if cs.len() != state.dim() {
            return Err(Error::DimensionMismatch {
                what: "c_coord",
                expected: state.dim(),
                found: cs.len(),
            });
        }
    }
    Ok(())
}

/// Shared update `x' = shrink(x) − damp·s_j·u_j + β(x_j − x_prev_j)` with
/// `s = state.coord_gamma`. Every rule goes through here so parameter
/// collapses give bit-identical iterates.
#[allow(clippy::needless_range_loop)]
fn apply(state: &mut OptimizerState, dir: &[f64], damp: f64, beta: f64, shrink: Shrink, gamma_scalar: f64) -> StepReport {
    let mut sq = 0.0;
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for j in 0..state.x.len() {
        let x = state.x[j];
        let s = state.coord_gamma[j];
        let base = match shrink {
            Shrink::None => x,
            Shrink::Decoupled(t) => x - t * x,
            Shrink::Coupled(t) => x / t,
        };
        let next = base - damp * (s * dir[j]) + beta * (x - state.x_prev[j]);
        let delta = next - x;
        sq += delta * delta;
        state.x_prev[j] = x;
        state.x[j] = next;
        lo = lo.min(s);
        hi = hi.max(s);
        sum += s;
    }
    state.k += 1;
    let d = state.x.len().max(1) as f64;
    StepReport {
        gamma_scalar,
        gamma_coord_min: lo,
        gamma_coord_max: hi,
        gamma_coord_mean: sum / d,
        update_norm: libm::sqrt(sq),
    }
}

fn refresh_precond(state: &mut OptimizerState, grad: &[f64], spec: &OptimizerSpec) {
    precond_in_place(&mut state.v, &mut state.precond, grad, spec.beta2, state.k, spec.eps);
    if spec.precond_identity {
        state.precond.iter_mut().for_each(|d| *d = 1.0);
    }
}

fn weighted_sq(grad: &[f64], precond: &[f64]) -> f64 {
    grad.iter().zip(precond).map(|(g, d)| g * g / d).sum()
}

fn plain_sq(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum()
}

/// Plain NGN: `x' = x − γ_k g`.
pub fn step_ngn(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::Ngn])?;
    let c = spec.current_c(state.k);
    let g = gamma(c, sample.loss, plain_sq(&sample.grad));
    state.coord_gamma.iter_mut().for_each(|s| *s = g);
    Ok(apply(state, &sample.grad, 1.0, 0.0, Shrink::None, g))
}

/// NGN-M. Ver.1 is heavy-ball momentum with a raw-gradient NGN step;
/// Ver.2 takes the NGN step along the gradient EMA (no bias correction).
pub fn step_ngn_m(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::NgnMV1, OptimizerKind::NgnMV2])?;
    let c = spec.current_c(state.k);
    let beta = spec.beta1;
    if spec.kind == OptimizerKind::NgnMV1 {
        let g = gamma(c, sample.loss, plain_sq(&sample.grad));
        state.coord_gamma.iter_mut().for_each(|s| *s = g);
        return Ok(apply(state, &sample.grad, 1.0 - beta, beta, Shrink::None, g));
    }
    let mut m = core::mem::take(&mut state.m);
    for (mj, gj) in m.iter_mut().zip(&sample.grad) {
        *mj = beta * *mj + (1.0 - beta) * gj;
    }
    let g = gamma(c, sample.loss, plain_sq(&m));
    state.coord_gamma.iter_mut().for_each(|s| *s = g);
    let report = apply(state, &m, 1.0, 0.0, Shrink::None, g);
    state.m = m;
    Ok(report)
}

/// NGN-D: an independent NGN step per coordinate.
pub fn step_ngn_d(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::NgnD])?;
    let c = spec.current_c(state.k);
    if spec.coord_precond {
        refresh_precond(state, &sample.grad, spec);
    }
    for j in 0..state.dim() {
        let mut cj = match &spec.c_coord {
            Some(cs) => super::schedule_c(spec.schedule, cs[j], state.k).unwrap_or(f64::NAN),
            None => c,
        };
        if spec.coord_precond {
            cj /= state.precond[j];
        }
        let gj = sample.grad[j];
        state.coord_gamma[j] = gamma(cj, sample.loss, gj * gj);
    }
    Ok(apply(state, &sample.grad, 1.0, 0.0, Shrink::None, c))
}

/// NGN-MD with the RMSprop preconditioner `D_k`.
pub fn step_ngn_md(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::NgnMdV1, OptimizerKind::NgnMdV2])?;
    let c = spec.current_c(state.k);
    refresh_precond(state, &sample.grad, spec);
    let scalar = if spec.kind == OptimizerKind::NgnMdV1 {
        md_v1_gammas(state, sample, c)
    } else {
        for j in 0..state.dim() {
            let gj = sample.grad[j];
            state.coord_gamma[j] = gamma(c / state.precond[j], sample.loss, gj * gj);
        }
        c
    };
    let beta = spec.beta1;
    Ok(apply(state, &sample.grad, 1.0 - beta, beta, Shrink::None, scalar))
}

fn md_v1_gammas(state: &mut OptimizerState, sample: &StepSample, c: f64) -> f64 {
    let g = gamma(c, sample.loss, weighted_sq(&sample.grad, &state.precond));
    for (s, d) in state.coord_gamma.iter_mut().zip(&state.precond) {
        *s = g / d;
    }
    g
}

/// NGN-MDv1 with decoupled or coupled weight decay.
pub fn step_ngn_md_wd(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::DecNgnMdV1, OptimizerKind::NgnMdV1W])?;
    let c = spec.current_c(state.k);
    let lambda = spec.wd_lambda;
    let beta = spec.beta1;
    refresh_precond(state, &sample.grad, spec);
    if lambda == 0.0 {
        let g = md_v1_gammas(state, sample, c);
        return Ok(apply(state, &sample.grad, 1.0 - beta, beta, Shrink::None, g));
    }
    if spec.kind == OptimizerKind::DecNgnMdV1 {
        let g = md_v1_gammas(state, sample, c);
        return Ok(apply(state, &sample.grad, 1.0 - beta, beta, Shrink::Decoupled(lambda * c), g));
    }
    let scale = 1.0 + lambda * c;
    let base = gamma(c / scale, sample.loss, weighted_sq(&sample.grad, &state.precond));
    let t = c * lambda * crate::problems::dot(&sample.grad, &state.x);
    let factor = if base == 0.0 || t == 0.0 {
        1.0
    } else {
        (1.0 - t / (2.0 * sample.loss)).max(0.0)
    };
    let g = base * factor;
    for (s, d) in state.coord_gamma.iter_mut().zip(&state.precond) {
        *s = g / d;
    }
    Ok(apply(state, &sample.grad, 1.0 - beta, beta, Shrink::Coupled(scale), g))
}

/// SGDM in heavy-ball form with a fixed rate, or bias-corrected Adam.
pub fn step_baseline(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    check(state, sample, spec, &[OptimizerKind::Sgdm, OptimizerKind::Adam])?;
    let c = spec.current_c(state.k);
    let beta = spec.beta1;
    if spec.kind == OptimizerKind::Sgdm {
        let damp = 1.0 - spec.dampening.unwrap_or(beta);
        state.coord_gamma.iter_mut().for_each(|s| *s = c);
        return Ok(apply(state, &sample.grad, damp, beta, Shrink::None, c));
    }
    precond_in_place(&mut state.v, &mut state.precond, &sample.grad, spec.beta2, state.k, spec.eps);
    let correction = 1.0 - libm::pow(beta, state.k as f64 + 1.0);
    let mut dir = Vec::with_capacity(state.dim());
    for j in 0..state.dim() {
        state.m[j] = beta * state.m[j] + (1.0 - beta) * sample.grad[j];
        dir.push(state.m[j] / correction);
        state.coord_gamma[j] = c / state.precond[j];
    }
    Ok(apply(state, &dir, 1.0, 0.0, Shrink::None, c))
}
