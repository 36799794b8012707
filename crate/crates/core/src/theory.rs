//! Closed-form convergence bounds and hyperparameter constraints.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::problems::StochasticObjective;
use crate::sampling::{sample_indices, Batch};

/// Inputs shared by the bound evaluators. Unused fields may stay at their
/// defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TheoryInputs {
    pub c: f64,
    pub l: f64,
    pub k: u64,
    /// `‖x⁰ − x*‖²`
    pub dist0_sq: f64,
    /// `E_S[f* − f_S*]`
    pub sigma_int_sq: f64,
    /// `E_S[f_S*]`
    pub sigma_pos_sq: f64,
    pub mu: f64,
    /// Per-coordinate noise `σ_j²`.
    pub sigma_coord_sq: Vec<f64>,
    pub c_coord: Vec<f64>,
    pub l_coord: Vec<f64>,
    /// `f(x⁰) − f*`
    pub f0_gap: f64,
}

impl TheoryInputs {
    pub fn new(c: f64, l: f64, k: u64, dist0_sq: f64) -> Self {
        Self {
            c,
            l,
            k,
            dist0_sq,
            ..Self::default()
        }
    }

    pub fn with_sigmas(mut self, sigma_int_sq: f64, sigma_pos_sq: f64) -> Self {
        self.sigma_int_sq = sigma_int_sq;
        self.sigma_pos_sq = sigma_pos_sq;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgnMParams {
    /// `c / ((1 + cL)(1 + 2cL))`
    pub rho: f64,
    pub lambda_max: f64,
    /// `λ_max / (1 + λ_max)`
    pub beta_max: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, "must be finite and positive"))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, "must be finite and non-negative"))
    }
}

pub fn ngn_m_params(c: f64, l: f64) -> Result<NgnMParams> {
    positive("c", c)?;
    positive("L", l)?;
    let cl = c * l;
    let prod = (1.0 + cl) * (1.0 + 2.0 * cl);
    let lambda_max = cl.min(0.5 / prod);
    Ok(NgnMParams {
        rho: c / prod,
        lambda_max,
        beta_max: lambda_max / (1.0 + lambda_max),
    })
}

/// Momentum `β = λ/(1 + λ)` for a given `λ`.
pub fn beta_from_lambda(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

/// Bound on the averaged suboptimality of NGN-M with constant `c`.
pub fn ngn_m_bound(inputs: &TheoryInputs) -> Result<f64> {
    let TheoryInputs { c, l, k, .. } = *inputs;
    positive("c", c)?;
    positive("L", l)?;
    if k == 0 {
        return Err(invalid("K", "must be positive"));
    }
    non_negative("dist0_sq", inputs.dist0_sq)?;
    non_negative("sigma_int_sq", inputs.sigma_int_sq)?;
    non_negative("sigma_pos_sq", inputs.sigma_pos_sq)?;
    let cl = c * l;
    let a = (1.0 + 2.0 * cl) * (1.0 + 2.0 * cl);
    let first = inputs.dist0_sq * a / (c * k as f64);
    let second = 8.0 * cl * a * inputs.sigma_int_sq;
    let third = 2.0 * cl * (2.0 * cl - 1.0).max(0.0) * inputs.sigma_pos_sq;
    Ok(first + second + third)
}

/// Bound on `f(x̂) − f*` for NGN-M with `c_k = c₀/√(k+1)`, where `x̂` is the
/// [`decaying_weights`] average of the iterates.
pub fn ngn_m_bound_decaying(c0: f64, l: f64, k: u64, dist0_sq: f64, sigma_int_sq: f64, sigma_pos_sq: f64) -> Result<f64> {
    positive("c0", c0)?;
    positive("L", l)?;
    if k == 0 {
        return Err(invalid("K", "must be positive"));
    }
    non_negative("dist0_sq", dist0_sq)?;
    non_negative("sigma_int_sq", sigma_int_sq)?;
    non_negative("sigma_pos_sq", sigma_pos_sq)?;
    let cl = c0 * l;
    let sk = libm::sqrt(k as f64);
    let log = libm::log(k as f64 + 2.0);
    let first = 5.0 * (1.0 + cl) * (1.0 + 2.0 * cl) * dist0_sq / (4.0 * c0 * sk);
    let second = 10.0 * cl * (1.0 + cl) * (1.0 + 2.0 * cl) * sigma_int_sq * log / sk;
    let third = 5.0 * cl * (1.0 + cl) * log / (2.0 * sk) * (2.0 * cl - 1.0).max(0.0) * sigma_pos_sq;
    Ok(first + second + third)
}

/// Normalized weights `ρ_k / Σρ_k`, `ρ_k = c_k/((1 + c_kL)(1 + 2c_kL))`,
/// `c_k = c₀/√(k+1)`, for `k < K`.
pub fn decaying_weights(c0: f64, l: f64, k: u64) -> Result<Vec<f64>> {
    positive("c0", c0)?;
    positive("L", l)?;
    let mut w: Vec<f64> = (0..k)
        .map(|i| {
            let c = c0 / libm::sqrt(i as f64 + 1.0);
            c / ((1.0 + c * l) * (1.0 + 2.0 * c * l))
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `Σ_{k<K} 1/√(k+1)`.
pub fn inv_sqrt_sum(k: u64) -> f64 {
    (0..k).map(|i| 1.0 / libm::sqrt(i as f64 + 1.0)).sum()
}

/// The lower bound `(4/5)√(K+1)` on [`inv_sqrt_sum`]. It holds for `K ≥ 2`;
/// at `K = 1` the sum is `1 < 0.8·√2`.
pub fn inv_sqrt_sum_lower(k: u64) -> f64 {
    0.8 * libm::sqrt(k as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgnDMode {
    Nonconvex,
    /// Linear rate under the Polyak-Łojasiewicz condition.
    Pl,
}

pub fn ngn_d_bound(inputs: &TheoryInputs, mode: NgnDMode) -> Result<f64> {
    let d = inputs.c_coord.len();
    if d == 0 {
        return Err(invalid("c_coord", "must be non-empty"));
    }
    for (what, v) in [("L_coord", &inputs.l_coord), ("sigma_coord_sq", &inputs.sigma_coord_sq)] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                what,
                expected: d,
                found: v.len(),
            });
        }
    }
    non_negative("f0_gap", inputs.f0_gap)?;
    if mode == NgnDMode::Pl {
        positive("mu", inputs.mu)?;
    } else if inputs.k == 0 {
        return Err(invalid("K", "must be positive"));
    }
    let mut c_min = f64::INFINITY;
    let mut noise = 0.0;
    for j in 0..d {
        let (c, l, s) = (inputs.c_coord[j], inputs.l_coord[j], inputs.sigma_coord_sq[j]);
        positive("c_coord", c)?;
        positive("L_coord", l)?;
        non_negative("sigma_coord_sq", s)?;
        let mut cap = 1.0 / (2.0 * l);
        if mode == NgnDMode::Pl {
            cap = cap.min(6.0 / inputs.mu);
        }
        if c > cap * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("c_{j} = {c} exceeds {cap}")));
        }
        c_min = c_min.min(c);
        noise += l * c * c * s;
    }
    Ok(match mode {
        NgnDMode::Nonconvex => 12.0 * inputs.f0_gap / (c_min * inputs.k as f64) + 18.0 * noise / c_min,
        NgnDMode::Pl => {
            let rate = 1.0 - inputs.mu * c_min / 6.0;
            libm::pow(rate, inputs.k as f64) * inputs.f0_gap + 9.0 * noise / (inputs.mu * c_min)
        }
    })
}

/// Range of the normalized step `γ̂_k` on the polynomial family with
/// constant `C`, and the momentum threshold that guarantees convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaHatRange {
    pub lo: f64,
    pub hi: f64,
    pub beta_threshold: f64,
}

pub fn gammahat_range(c_poly: f64) -> Result<GammaHatRange> {
    if c_poly.is_nan() || c_poly < 0.0 {
        return Err(invalid("C", "must be non-negative"));
    }
    if c_poly.is_infinite() {
        return Ok(GammaHatRange {
            lo: 0.0,
            hi: 2.0,
            beta_threshold: 1.0,
        });
    }
    let a = 2.0 * (1.0 + c_poly);
    Ok(GammaHatRange {
        lo: 1.0 / a,
        hi: 2.0,
        beta_threshold: (a - 1.0) * (a - 1.0) / ((a + 1.0) * (a + 1.0)),
    })
}

/// Noise estimates with their standard errors (zero when enumerated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma_int_sq: f64,
    pub sigma_pos_sq: f64,
    pub stderr_int: f64,
    pub stderr_pos: f64,
    pub batches: usize,
    pub enumerated: bool,
}

pub const ENUMERATION_LIMIT: u64 = 10_000;
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Number of size-`k` subsets of `n` items, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// `σ²_int` and `σ²_pos` for uniformly drawn batches of `batch_size`.
/// Enumerates every batch when there are at most [`ENUMERATION_LIMIT`],
/// otherwise averages `n_mc` seeded draws.
pub fn estimate_sigmas(problem: &StochasticObjective, batch_size: usize, n_mc: usize, seed: u64) -> Result<SigmaEstimate> {
    let n = problem.n_samples();
    if batch_size == 0 || batch_size > n {
        return Err(Error::BatchTooLarge {
            requested: batch_size,
            available: n,
        });
    }
    if binomial(n as u64, batch_size as u64) <= ENUMERATION_LIMIT {
        return enumerate_sigmas(problem, batch_size);
    }
    estimate_sigmas_monte_carlo(problem, batch_size, n_mc, seed)
}

pub fn estimate_sigmas_monte_carlo(
    problem: &StochasticObjective,
    batch_size: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SigmaEstimate> {
    let f_star = problem.metadata().f_star.ok_or(Error::MissingMetadata("f_star"))?;
    if n_mc < 2 {
        return Err(invalid("n_mc", "needs at least two samples"));
    }
    let mut minima = Vec::with_capacity(n_mc);
    for i in 0..n_mc {
        let batch = sample_indices(problem.n_samples(), seed, i as u64, batch_size)?;
        minima.push(problem.batch_minimum(&batch)?);
    }
    let m = n_mc as f64;
    let mean = minima.iter().sum::<f64>() / m;
    let var = minima.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    let se = libm::sqrt(var / m);
    Ok(SigmaEstimate {
        sigma_int_sq: f_star - mean,
        sigma_pos_sq: mean,
        stderr_int: se,
        stderr_pos: se,
        batches: n_mc,
        enumerated: false,
    })
}

fn enumerate_sigmas(problem: &StochasticObjective, batch_size: usize) -> Result<SigmaEstimate> {
    let f_star = problem.metadata().f_star.ok_or(Error::MissingMetadata("f_star"))?;
    let n = problem.n_samples();
    let mut idx: Vec<usize> = (0..batch_size).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    loop {
        let batch = Batch::from_indices(idx.clone(), n)?;
        total += problem.batch_minimum(&batch)?;
        count += 1;
        // Advance to the next combination in lexicographic order.
        let mut i = batch_size;
        while i > 0 && idx[i - 1] == n - batch_size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..batch_size {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let mean = total / count as f64;
    Ok(SigmaEstimate {
        sigma_int_sq: f_star - mean,
        sigma_pos_sq: mean,
        stderr_int: 0.0,
        stderr_pos: 0.0,
        batches: count,
        enumerated: true,
    })
}

/// Per-coordinate gradient noise `E_S[(∂_j f_S(x) − ∂_j f(x))²]` at `x`,
/// averaged over `n_mc` seeded batches.
pub fn coord_gradient_variance(
    problem: &StochasticObjective,
    x: &[f64],
    batch_size: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let full = problem.evaluate(x, &problem.full_batch())?;
    let d = problem.dim();
    let mut acc = vec![0.0; d];
    let mut g = vec![0.0; d];
    for i in 0..n_mc {
        let batch = sample_indices(problem.n_samples(), seed, i as u64, batch_size)?;
        problem.eval_into(x, &batch, &mut g)?;
        for j in 0..d {
            let e = g[j] - full.grad[j];
            acc[j] += e * e;
        }
    }
    acc.iter_mut().for_each(|v| *v /= n_mc.max(1) as f64);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_problem, ProblemSpec};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * b.abs().max(1.0)
    }

    #[test]
    fn params_examples() {
        let p = ngn_m_params(1.0, 1.0).unwrap();
        assert!(close(p.rho, 1.0 / 6.0) && close(p.lambda_max, 1.0 / 12.0) && close(p.beta_max, 1.0 / 13.0));
        assert!(close(ngn_m_params(0.5, 2.0).unwrap().rho, 1.0 / 12.0));
        let tiny = ngn_m_params(1e-9, 1.0).unwrap();
        assert!((tiny.rho - 1e-9).abs() < 1e-16 && close(tiny.lambda_max, 1e-9));
        assert!(ngn_m_params(0.0, 1.0).is_err());
    }

    #[test]
    fn constant_bound_examples() {
        let b = ngn_m_bound(&TheoryInputs::new(1.0, 1.0, 100, 1.0)).unwrap();
        assert!(close(b, 0.09));
        // 2cL ≤ 1 kills the positive-error term.
        let a = ngn_m_bound(&TheoryInputs::new(0.25, 2.0, 10, 1.0).with_sigmas(0.0, 5.0)).unwrap();
        let z = ngn_m_bound(&TheoryInputs::new(0.25, 2.0, 10, 1.0)).unwrap();
        assert_eq!(a, z);
        let full = ngn_m_bound(&TheoryInputs::new(1.0, 1.0, 100, 1.0).with_sigmas(0.5, 2.0)).unwrap();
        assert!(close(full, 0.09 + 8.0 * 9.0 * 0.5 + 2.0 * 1.0 * 2.0));
        assert!(ngn_m_bound(&TheoryInputs::new(1.0, 1.0, 0, 1.0)).is_err());
    }

    #[test]
    fn decaying_bound_examples() {
        assert!(close(ngn_m_bound_decaying(1.0, 1.0, 1, 1.0, 0.0, 0.0).unwrap(), 7.5));
        let k = 400u64;
        let b = ngn_m_bound_decaying(2.0, 1.0, k, 0.0, 1.0, 1.0).unwrap();
        let log = libm::log(402.0);
        let want = 10.0 * 2.0 * 3.0 * 5.0 * log / 20.0 + 5.0 * 2.0 * 3.0 * log / 40.0 * 3.0;
        assert!(close(b, want));
        let w = decaying_weights(1.0, 2.0, 50).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn inv_sqrt_sum_lower_bound() {
        // The bound fails only for the single-term sum: 1 < 0.8·√2.
        assert!(inv_sqrt_sum(1) < inv_sqrt_sum_lower(1));
        for k in 2..=10_000u64 {
            assert!(inv_sqrt_sum(k) >= inv_sqrt_sum_lower(k), "K = {k}");
        }
    }

    #[test]
    fn harmonic_sum_vs_log() {
        // Σ 1/(k+1) ≤ log(K+2) only for K = 1; 1 + log K is the valid bound.
        let mut h = 0.0;
        for k in 1..=10_000u64 {
            h += 1.0 / k as f64;
            assert_eq!(h <= libm::log(k as f64 + 2.0), k == 1, "K = {k}");
            assert!(h <= 1.0 + libm::log(k as f64));
        }
    }

    #[test]
    fn ngn_d_examples() {
        let l = 3.0;
        let inputs = TheoryInputs {
            k: 50,
            c_coord: vec![1.0 / (2.0 * l)],
            l_coord: vec![l],
            sigma_coord_sq: vec![0.0],
            f0_gap: 2.0,
            ..TheoryInputs::default()
        };
        assert!(close(ngn_d_bound(&inputs, NgnDMode::Nonconvex).unwrap(), 24.0 * l * 2.0 / 50.0));

        let pl = TheoryInputs {
            k: 1,
            mu: 1.2,
            c_coord: vec![0.5],
            l_coord: vec![1.0],
            sigma_coord_sq: vec![0.0],
            f0_gap: 1.0,
            ..TheoryInputs::default()
        };
        assert!(close(ngn_d_bound(&pl, NgnDMode::Pl).unwrap(), 0.9));
        let far = TheoryInputs { k: 100_000, ..pl.clone() };
        assert!(ngn_d_bound(&far, NgnDMode::Pl).unwrap() < 1e-300);

        let bad = TheoryInputs {
            c_coord: vec![1.0],
            ..inputs
        };
        assert!(matches!(ngn_d_bound(&bad, NgnDMode::Nonconvex), Err(Error::Precondition(_))));
    }

    #[test]
    fn gammahat_examples() {
        let r = gammahat_range(1.0).unwrap();
        assert!(close(r.lo, 0.25) && r.hi == 2.0 && close(r.beta_threshold, 9.0 / 25.0));
        let r = gammahat_range(0.0).unwrap();
        assert!(close(r.lo, 0.5) && close(r.beta_threshold, 1.0 / 9.0));
        let r = gammahat_range(1e12).unwrap();
        assert!(r.lo < 1e-12 && r.beta_threshold > 1.0 - 1e-11);
        assert!(gammahat_range(-1.0).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(20, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(1000, 500), u64::MAX);
    }

    #[test]
    fn sigma_examples() {
        let p = build_problem(&ProblemSpec::random_least_squares(12, 3, 7, false)).unwrap();
        let f_star = p.metadata().f_star.unwrap();
        let full = estimate_sigmas(&p, 12, 100, 0).unwrap();
        assert!(full.enumerated && full.batches == 1);
        assert!(full.sigma_int_sq.abs() < 1e-12 && (full.sigma_pos_sq - f_star).abs() < 1e-12);

        let single = estimate_sigmas(&p, 1, 100, 0).unwrap();
        assert!(single.sigma_pos_sq.abs() < 1e-12 && (single.sigma_int_sq - f_star).abs() < 1e-12);

        let interp = build_problem(&ProblemSpec::random_least_squares(12, 3, 7, true)).unwrap();
        let s = estimate_sigmas(&interp, 4, 100, 0).unwrap();
        assert_eq!(s.batches, 495);
        assert!(s.sigma_int_sq.abs() < 1e-10 && s.sigma_pos_sq.abs() < 1e-10);
    }
}
