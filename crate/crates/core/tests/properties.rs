use ngn_core::optimizers::{ngn_gamma, OptimizerKind, OptimizerSpec};
use ngn_core::problems::{build_problem, ProblemSpec};
use ngn_core::run::{run_once, RunBudget};
use ngn_core::theory::{
    estimate_sigmas, estimate_sigmas_monte_carlo, ngn_m_bound, ngn_m_bound_decaying, ngn_m_params, TheoryInputs,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-300..1e-10f64, 1e-10..1e6f64]
}

fn grad_sq() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-300..1e-10f64, 1e-10..1e12f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn gamma_is_finite_and_capped(c in 1e-6..1e6f64, f in loss(), g in grad_sq()) {
        let gamma = ngn_gamma(c, f, g).unwrap();
        prop_assert!(gamma.is_finite());
        prop_assert!((0.0..=c).contains(&gamma));
    }

    #[test]
    fn gamma_non_increasing_in_grad(c in 1e-6..1e6f64, f in loss(), g in grad_sq(), dg in 0.0..1e6f64) {
        prop_assert!(ngn_gamma(c, f, g + dg).unwrap() <= ngn_gamma(c, f, g).unwrap());
    }

    #[test]
    fn gamma_non_decreasing_in_loss(c in 1e-6..1e6f64, f in loss(), df in 0.0..1e6f64, g in 1e-300..1e12f64) {
        prop_assert!(ngn_gamma(c, f + df, g).unwrap() >= ngn_gamma(c, f, g).unwrap());
    }

    #[test]
    fn bounds_shrink_with_horizon(c in 1e-3..1e2f64, l in 1e-3..1e2f64, k in 1u64..1_000_000, d in 0.0..1e3f64,
                                  si in 0.0..10.0f64, sp in 0.0..10.0f64) {
        let a = ngn_m_bound(&TheoryInputs::new(c, l, k, d).with_sigmas(si, sp)).unwrap();
        let b = ngn_m_bound(&TheoryInputs::new(c, l, k + 1, d).with_sigmas(si, sp)).unwrap();
        prop_assert!(a >= 0.0 && b <= a);
        let a = ngn_m_bound_decaying(c, l, k, d, 0.0, 0.0).unwrap();
        let b = ngn_m_bound_decaying(c, l, k + 1, d, 0.0, 0.0).unwrap();
        prop_assert!(a >= 0.0 && b <= a);
    }
}

#[test]
fn momentum_parameters_respect_both_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10_000 {
        let c = 10f64.powf(rng.random_range(-6.0..6.0));
        let l = 10f64.powf(rng.random_range(-6.0..6.0));
        let p = ngn_m_params(c, l).unwrap();
        let cl = c * l;
        assert!(2.0 * p.lambda_max * (1.0 + cl) * (1.0 + 2.0 * cl) <= 1.0 + 1e-12);
        assert!(p.lambda_max <= cl);
        assert!(p.beta_max >= 0.0 && p.beta_max < 1.0);
    }
}

#[test]
fn enumeration_agrees_with_monte_carlo() {
    let p = build_problem(&ProblemSpec::random_least_squares(14, 3, 5, false)).unwrap();
    // C(14, 4) = 1001 batches, enumerated.
    let exact = estimate_sigmas(&p, 4, 10_000, 0).unwrap();
    assert!(exact.enumerated);
    let mc = estimate_sigmas_monte_carlo(&p, 4, 10_000, 3).unwrap();
    assert!(!mc.enumerated);
    assert!((mc.sigma_pos_sq - exact.sigma_pos_sq).abs() <= 3.0 * mc.stderr_pos, "{mc:?} vs {exact:?}");
    assert!((mc.sigma_int_sq - exact.sigma_int_sq).abs() <= 3.0 * mc.stderr_int);
}

#[test]
fn identical_inputs_give_identical_records() {
    let p = build_problem(&ProblemSpec::random_least_squares(50, 8, 2, false)).unwrap();
    for kind in OptimizerKind::ALL {
        let spec = OptimizerSpec::new(kind, 0.05).with_weight_decay(if kind == OptimizerKind::NgnMdV1W { 0.01 } else { 0.0 });
        let budget = RunBudget::new(300).with_batch_size(5).with_trace();
        let a = run_once(&p, &spec, &budget, 9).unwrap();
        let b = run_once(&p, &spec, &budget, 9).unwrap();
        assert_eq!(a, b, "{kind}");
        for r in &a.step_reports {
            assert!(r.gamma_coord_min >= 0.0 && r.gamma_coord_max.is_finite(), "{kind}");
        }
    }
}
