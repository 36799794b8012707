//! The NGN step-size family and its baselines.
//!
//! All update rules share one state layout ([`OptimizerState`]) and return a
//! [`StepReport`] describing the effective step-size that was applied.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::problems::StepSample;

mod steps;

pub use steps::{step_baseline, step_ngn, step_ngn_d, step_ngn_m, step_ngn_md, step_ngn_md_wd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Ngn,
    /// Heavy-ball momentum on top of the raw-gradient NGN step (NGN-M).
    NgnMV1,
    /// NGN step computed on the EMA of gradients.
    NgnMV2,
    NgnD,
    NgnMdV1,
    NgnMdV2,
    DecNgnMdV1,
    NgnMdV1W,
    Sgdm,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 10] = [
        OptimizerKind::Ngn,
        OptimizerKind::NgnMV1,
        OptimizerKind::NgnMV2,
        OptimizerKind::NgnD,
        OptimizerKind::NgnMdV1,
        OptimizerKind::NgnMdV2,
        OptimizerKind::DecNgnMdV1,
        OptimizerKind::NgnMdV1W,
        OptimizerKind::Sgdm,
        OptimizerKind::Adam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Ngn => "ngn",
            OptimizerKind::NgnMV1 => "ngn-m",
            OptimizerKind::NgnMV2 => "ngn-m-v2",
            OptimizerKind::NgnD => "ngn-d",
            OptimizerKind::NgnMdV1 => "ngn-md-v1",
            OptimizerKind::NgnMdV2 => "ngn-md-v2",
            OptimizerKind::DecNgnMdV1 => "dec-ngn-md-v1",
            OptimizerKind::NgnMdV1W => "ngn-md-v1w",
            OptimizerKind::Sgdm => "sgdm",
            OptimizerKind::Adam => "adam",
        }
    }

    /// Whether the rule uses the second-moment preconditioner `D_k`.
    pub fn uses_preconditioner(self) -> bool {
        matches!(
            self,
            OptimizerKind::NgnMdV1 | OptimizerKind::NgnMdV2 | OptimizerKind::DecNgnMdV1 | OptimizerKind::NgnMdV1W
        )
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "ngn" => OptimizerKind::Ngn,
            "ngn-m" | "ngn-m-v1" | "ngnm" => OptimizerKind::NgnMV1,
            "ngn-m-v2" => OptimizerKind::NgnMV2,
            "ngn-d" => OptimizerKind::NgnD,
            "ngn-md-v1" | "ngn-mdv1" => OptimizerKind::NgnMdV1,
            "ngn-md-v2" | "ngn-mdv2" => OptimizerKind::NgnMdV2,
            "dec-ngn-md-v1" | "dec-ngn-mdv1" => OptimizerKind::DecNgnMdV1,
            "ngn-md-v1w" | "ngn-mdv1w" => OptimizerKind::NgnMdV1W,
            "sgdm" | "gdm" | "sgd" => OptimizerKind::Sgdm,
            "adam" => OptimizerKind::Adam,
            _ => return Err(Error::UnknownKind(s.to_string())),
        })
    }
}

/// Step-size hyperparameter schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    Constant,
    /// `c₀/√K` for a horizon of `K` steps, constant over the run.
    InvSqrtK(u64),
    /// `c₀/√(k + 1)` at step `k`.
    InvSqrtStep,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant => f.write_str("constant"),
            Schedule::InvSqrtK(k) => write!(f, "inv-sqrt-k:{k}"),
            Schedule::InvSqrtStep => f.write_str("inv-sqrt-step"),
        }
    }
}

pub fn schedule_c(schedule: Schedule, c0: f64, k: u64) -> Result<f64> {
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(invalid("c", "must be finite and positive"));
    }
    Ok(match schedule {
        Schedule::Constant => c0,
        Schedule::InvSqrtK(0) => return Err(invalid("K", "horizon missing for the 1/sqrt(K) schedule")),
        Schedule::InvSqrtK(horizon) => c0 / libm::sqrt(horizon as f64),
        Schedule::InvSqrtStep => c0 / libm::sqrt(k as f64 + 1.0),
    })
}

/// Algorithm choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Step-size hyperparameter (learning rate for the baselines).
    pub c: f64,
    /// Momentum `β` / `β₁`.
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub wd_lambda: f64,
    pub schedule: Schedule,
    /// Per-coordinate `c_j` for NGN-D; defaults to broadcasting `c`.
    pub c_coord: Option<Vec<f64>>,
    /// Forces `D_k = I` in the preconditioned variants.
    pub precond_identity: bool,
    /// NGN-D with `c_j = c / (D_k)_j` from the RMSprop preconditioner.
    pub coord_precond: bool,
    /// SGDM dampening `d` in `m ← βm + (1 − d)g`; `None` means `d = β`.
    pub dampening: Option<f64>,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, c: f64) -> Self {
        Self {
            kind,
            c,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            wd_lambda: 0.0,
            schedule: Schedule::Constant,
            c_coord: None,
            precond_identity: false,
            coord_precond: false,
            dampening: None,
        }
    }

    pub fn with_beta(mut self, beta1: f64) -> Self {
        self.beta1 = beta1;
        self
    }

    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = beta2;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_weight_decay(mut self, wd_lambda: f64) -> Self {
        self.wd_lambda = wd_lambda;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_coord_c(mut self, c_coord: Vec<f64>) -> Self {
        self.c_coord = Some(c_coord);
        self
    }

    pub fn with_identity_precond(mut self) -> Self {
        self.precond_identity = true;
        self
    }

    pub fn with_dampening(mut self, dampening: f64) -> Self {
        self.dampening = Some(dampening);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid("c", "must be finite and positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(invalid("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("beta2", "must lie in [0, 1)"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid("eps", "must be finite and positive"));
        }
        if !(self.wd_lambda.is_finite() && self.wd_lambda >= 0.0) {
            return Err(invalid("wd_lambda", "must be finite and non-negative"));
        }
        if let Some(d) = self.dampening {
            if !(0.0..=1.0).contains(&d) {
                return Err(invalid("dampening", "must lie in [0, 1]"));
            }
        }
        if let Schedule::InvSqrtK(0) = self.schedule {
            return Err(invalid("K", "horizon missing for the 1/sqrt(K) schedule"));
        }
        if let Some(cs) = &self.c_coord {
            if cs.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "c_coord",
                    expected: dim,
                    found: cs.len(),
                });
            }
            if cs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(invalid("c_coord", "entries must be finite and positive"));
            }
        }
        Ok(())
    }

    pub(crate) fn current_c(&self, k: u64) -> f64 {
        // c > 0 and K ≥ 1 are checked by validate.
        schedule_c(self.schedule, self.c, k).unwrap_or(f64::NAN)
    }
}

/// Per-run mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
    /// Second-moment EMA.
    pub v: Vec<f64>,
    /// First-moment buffer (NGN-M Ver.2 and Adam).
    pub m: Vec<f64>,
    pub k: u64,
    coord_gamma: Vec<f64>,
    precond: Vec<f64>,
}

impl OptimizerState {
    /// Fresh state with `x_prev = x` and zeroed moment buffers.
    pub fn new(x0: Vec<f64>) -> Self {
        let d = x0.len();
        Self {
            x_prev: x0.clone(),
            x: x0,
            v: vec![0.0; d],
            m: vec![0.0; d],
            k: 0,
            coord_gamma: vec![0.0; d],
            precond: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Effective per-coordinate multiplier applied to the gradient (or to
    /// the first moment for Adam) at the last step.
    pub fn coord_gammas(&self) -> &[f64] {
        &self.coord_gamma
    }

    /// Preconditioner diagonal `D_k` used at the last step.
    pub fn preconditioner(&self) -> &[f64] {
        &self.precond
    }
}

/// Effective step-size summary of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `γ_k` for scalar NGN rules; the scheduled `c_k` for coordinate-wise
    /// rules and the baselines.
    pub gamma_scalar: f64,
    pub gamma_coord_min: f64,
    pub gamma_coord_max: f64,
    pub gamma_coord_mean: f64,
    pub update_norm: f64,
}

/// NGN step-size `c / (1 + c‖g‖²/(2f))`.
///
/// Returns `c` whenever `grad_sq = 0`, including at `loss = 0`.
pub fn ngn_gamma(c: f64, loss: f64, grad_sq: f64) -> Result<f64> {
    if !(c.is_finite() && loss.is_finite() && grad_sq.is_finite()) {
        return Err(Error::NonFinite("ngn_gamma input"));
    }
    if c <= 0.0 {
        return Err(invalid("c", "must be positive"));
    }
    if loss < 0.0 || grad_sq < 0.0 {
        return Err(invalid("loss/grad_sq", "must be non-negative"));
    }
    Ok(gamma(c, loss, grad_sq))
}

/// Unchecked [`ngn_gamma`]. Every operation is monotone, so the result is
/// non-increasing in `grad_sq`, non-decreasing in `loss` and never above `c`.
#[inline]
pub(crate) fn gamma(c: f64, loss: f64, grad_sq: f64) -> f64 {
    if grad_sq == 0.0 {
        return c;
    }
    let curvature = grad_sq / (2.0 * loss);
    c / (1.0 + c * curvature)
}

/// One RMSprop preconditioner refresh at step `k` (counting from 0):
/// `v ← β₂v + (1 − β₂)g²`, `D = ε + √(v / (1 − β₂^{k+1}))`.
pub fn precond_update(v: &[f64], grad: &[f64], beta2: f64, k: u64, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient",
            expected: v.len(),
            found: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut v_new = v.to_vec();
    let mut d = vec![0.0; v.len()];
    precond_in_place(&mut v_new, &mut d, grad, beta2, k, eps);
    Ok((v_new, d))
}

pub(crate) fn precond_in_place(v: &mut [f64], d: &mut [f64], grad: &[f64], beta2: f64, k: u64, eps: f64) {
    let correction = 1.0 - libm::pow(beta2, k as f64 + 1.0);
    for ((vj, dj), g) in v.iter_mut().zip(d.iter_mut()).zip(grad) {
        *vj = beta2 * *vj + (1.0 - beta2) * (g * g);
        *dj = eps + libm::sqrt(*vj / correction);
    }
}

/// Applies the update rule selected by `spec.kind`.
pub fn step(state: &mut OptimizerState, sample: &StepSample, spec: &OptimizerSpec) -> Result<StepReport> {
    match spec.kind {
        OptimizerKind::Ngn => step_ngn(state, sample, spec),
        OptimizerKind::NgnMV1 | OptimizerKind::NgnMV2 => step_ngn_m(state, sample, spec),
        OptimizerKind::NgnD => step_ngn_d(state, sample, spec),
        OptimizerKind::NgnMdV1 | OptimizerKind::NgnMdV2 => step_ngn_md(state, sample, spec),
        OptimizerKind::DecNgnMdV1 | OptimizerKind::NgnMdV1W => step_ngn_md_wd(state, sample, spec),
        OptimizerKind::Sgdm | OptimizerKind::Adam => step_baseline(state, sample, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(ngn_gamma(1.0, 2.0, 4.0).unwrap(), 0.5);
        assert_eq!(ngn_gamma(0.3, 5.0, 0.0).unwrap(), 0.3);
        assert_eq!(ngn_gamma(0.3, 0.0, 0.0).unwrap(), 0.3);
        assert_eq!(ngn_gamma(0.3, 0.0, 1.0).unwrap(), 0.0);
        assert!(ngn_gamma(1.0, f64::NAN, 1.0).is_err());
        assert!(ngn_gamma(1.0, 1.0, f64::INFINITY).is_err());
        assert!(ngn_gamma(0.0, 1.0, 1.0).is_err());
        assert!(ngn_gamma(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_on_scalar_quadratic_hits_lower_bound() {
        // f = ½Lx² ⇒ ‖∇f‖²/(2f) = L.
        for &l in &[0.1, 1.0, 7.5] {
            for &c in &[1e-3, 1.0, 100.0] {
                for &x in &[-3.0, 0.25, 9.0] {
                    let f: f64 = 0.5 * l * x * x;
                    let g = l * x;
                    let got = ngn_gamma(c, f, g * g).unwrap();
                    let want = c / (1.0 + c * l);
                    assert!((got - want).abs() <= 1e-14 * c, "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(schedule_c(Schedule::InvSqrtStep, 1.0, 0).unwrap(), 1.0);
        assert_eq!(schedule_c(Schedule::InvSqrtStep, 1.0, 3).unwrap(), 0.5);
        for k in [0, 7, 99] {
            assert_eq!(schedule_c(Schedule::InvSqrtK(100), 1.0, k).unwrap(), 0.1);
        }
        assert_eq!(schedule_c(Schedule::Constant, 0.7, 12).unwrap(), 0.7);
        assert!(schedule_c(Schedule::InvSqrtK(0), 1.0, 0).is_err());
    }

    #[test]
    fn precond_first_step() {
        let (v, d) = precond_update(&[0.0, 0.0], &[2.0, 0.0], 0.999, 0, 1e-8).unwrap();
        assert!((v[0] - 0.004).abs() < 1e-15 && v[1] == 0.0);
        assert!((d[0] - (2.0 + 1e-8)).abs() < 1e-12);
        assert_eq!(d[1], 1e-8);
    }

    #[test]
    fn precond_zero_gradient_and_no_decay() {
        let (_, d) = precond_update(&[0.0; 3], &[0.0; 3], 0.9, 4, 1e-6).unwrap();
        assert_eq!(d, vec![1e-6; 3]);
        let mut v = vec![5.0, 1.0];
        for (k, g) in [[1.5, -2.0], [-0.5, 3.0], [0.0, 1.0]].iter().enumerate() {
            let (v_new, d) = precond_update(&v, g, 0.0, k as u64, 1e-8).unwrap();
            for j in 0..2 {
                assert!((d[j] - (1e-8 + g[j].abs())).abs() < 1e-15);
            }
            v = v_new;
        }
        assert!(precond_update(&[0.0], &[f64::NAN], 0.9, 0, 1e-8).is_err());
        assert!(precond_update(&[0.0], &[1.0, 2.0], 0.9, 0, 1e-8).is_err());
    }

    #[test]
    fn spec_validation() {
        let ok = OptimizerSpec::new(OptimizerKind::NgnD, 1.0);
        assert!(ok.validate(3).is_ok());
        assert!(OptimizerSpec::new(OptimizerKind::Ngn, 0.0).validate(1).is_err());
        assert!(ok.clone().with_beta(1.0).validate(3).is_err());
        assert!(ok.clone().with_beta2(-0.1).validate(3).is_err());
        assert!(ok.clone().with_eps(0.0).validate(3).is_err());
        assert!(ok.clone().with_weight_decay(-1.0).validate(3).is_err());
        assert!(ok.clone().with_schedule(Schedule::InvSqrtK(0)).validate(3).is_err());
        assert!(matches!(
            ok.clone().with_coord_c(vec![1.0, 1.0]).validate(3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ok.clone().with_coord_c(vec![1.0, 0.0, 1.0]).validate(3).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in OptimizerKind::ALL {
            assert_eq!(kind.name().parse::<OptimizerKind>().unwrap(), kind);
        }
        assert!("lion".parse::<OptimizerKind>().is_err());
    }
}
