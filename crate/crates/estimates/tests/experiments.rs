use bhlab_estimates::stats::{batch_means, linear_fit, mean_se, trapezoid, KahanSum, RunningTrapezoid};
use bhlab_estimates::*;
use bhlab_noise::{CovarianceSpec, NoiseCoefficient};
use bhlab_solver::SolverConfig;
use bhlab_spectral::{lambda, ModelParams, SpectralField, PI_SQ};
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap()
}

fn setup(amplitude: f64, n: usize, dt: f64, t_end: f64) -> Setup {
    Setup::new(
        params(),
        NoiseCoefficient::additive(amplitude).unwrap(),
        CovarianceSpec::power_law(n, 2.0).unwrap(),
        SolverConfig::new(n, dt, t_end).unwrap(),
        11,
    )
}

fn u0() -> SpectralField {
    SpectralField::new(vec![0.5, 0.2, 0.1]).unwrap()
}

fn v0() -> SpectralField {
    SpectralField::new(vec![-0.3, 0.1]).unwrap()
}

#[test]
fn comparison_margins_and_verdict_recompute() {
    let c = Comparison::at_most("x", 1.2, 0.1, 1.0);
    assert!(c.holds);
    assert!((c.margin - 0.1).abs() < 1e-12);
    let d = Comparison::at_least("y", 0.5, 0.1, 1.0);
    assert!(!d.holds);
    let mut r = ExperimentReport::new("t", "descriptive", serde_json::json!({}), 1);
    r.compare(c);
    assert_eq!(r.verdict, Verdict::BoundRespected);
    r.compare(d);
    assert_eq!(r.verdict, Verdict::BoundViolated);
    assert_eq!(r.recompute_verdict(), r.verdict);
    r.inconclusive("because");
    assert_eq!(r.verdict, Verdict::Inconclusive);
}

#[test]
fn report_json_round_trip_keeps_infinities() {
    let mut r = ExperimentReport::new("t", "descriptive", serde_json::json!({"a": 1}), 3);
    r.bound("huge", f64::INFINITY);
    r.compare(Comparison::at_most("c", 1.0, 0.0, f64::INFINITY));
    let text = serde_json::to_string(&r).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.get("huge").unwrap().value, f64::INFINITY);
    assert_eq!(back.recompute_verdict(), Verdict::BoundRespected);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}

#[test]
fn stats_helpers_match_closed_forms() {
    let mut k = KahanSum::default();
    (0..1_000_000).for_each(|_| k.add(0.1));
    assert!((k.value() - 100_000.0).abs() < 1e-9);
    let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
    let f = linear_fit(&xs, &ys);
    assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12 && f.slope_se < 1e-12);
    let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
    assert!((m.mean - 2.5).abs() < 1e-15);
    assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    let b = batch_means(&xs, 5);
    assert!((b.mean - 4.5).abs() < 1e-15);
    let vals: Vec<f64> = (0..=100).map(|i| (i as f64 * 0.01).powi(2)).collect();
    assert!((trapezoid(&vals, 0.01) - (1.0 / 3.0 + 0.01f64.powi(2) / 6.0)).abs() < 1e-12);
    let mut rt = RunningTrapezoid::default();
    vals.iter().for_each(|v| rt.add(*v));
    assert!((rt.value(0.01) - trapezoid(&vals, 0.01)).abs() < 1e-14);
}

proptest! {
    #[test]
    fn checkpoints_are_increasing_and_end_at_horizon(n in 1usize..5000, c in 1usize..12) {
        let s = checkpoint_steps(n, c);
        prop_assert_eq!(*s.last().unwrap(), n);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s[0] >= 1);
    }
}

#[test]
fn energy_without_noise_from_rest_is_zero() {
    let s = setup(0.0, 8, 1e-2, 1.0);
    let r = verify_energy_bounds(&s, &EnergyConfig { u0: SpectralField::zeros(8), ensemble: 4, order: 2 }).unwrap();
    assert_eq!(r.get("energy1 left side").unwrap().value, 0.0);
    assert_eq!(r.get("energy1 bound").unwrap().value, 0.0);
    assert_eq!(r.verdict, Verdict::BoundRespected);
}

#[test]
fn energy_bounds_hold_for_small_additive_noise() {
    let s = setup(0.1, 16, 1e-3, 1.0);
    let r = verify_energy_bounds(&s, &EnergyConfig { u0: u0(), ensemble: 200, order: 2 }).unwrap();
    assert_eq!(r.verdict, Verdict::BoundRespected, "{r:#?}");
    assert!(r.get("energy2 bound").unwrap().value.is_finite());
    let sq = r.get("second moment of time-integrated H1 norm squared").unwrap();
    assert!(sq.value.is_finite() && sq.standard_error.unwrap() > 0.0);
}

#[test]
fn energy2_constant_for_p2() {
    let s = setup(0.1, 16, 1e-3, 1.0);
    let r = verify_energy_bounds(&s.with_solver(SolverConfig::new(16, 1e-2, 0.1).unwrap()),
        &EnergyConfig { u0: u0(), ensemble: 2, order: 2 }).unwrap();
    let k = r.get("growth constant K").unwrap().value;
    let c = r.get("energy2 constant C(p,K,T)").unwrap().value;
    assert!((c - 2916.0 * k * k).abs() < 1e-9 * c);
}

#[test]
fn identical_starts_give_zero_difference() {
    let s = setup(0.5, 8, 1e-2, 0.5).with_noise(NoiseCoefficient::multiplicative(0.5, 0.5).unwrap());
    let r = verify_uniqueness_contraction(&s, &UniquenessConfig { u0: u0(), v0: u0(), ensemble: 8, checkpoints: 5 })
        .unwrap();
    assert!(r.quantities.iter().filter(|q| q.label.starts_with("weighted")).all(|q| q.value == 0.0));
    assert_eq!(r.verdict, Verdict::BoundRespected);
}

#[test]
fn uniqueness_contraction_holds_under_multiplicative_noise() {
    let s = setup(0.5, 16, 1e-3, 1.0).with_noise(NoiseCoefficient::multiplicative(0.5, 0.5).unwrap());
    let r = verify_uniqueness_contraction(&s, &UniquenessConfig { u0: u0(), v0: v0(), ensemble: 200, checkpoints: 5 })
        .unwrap();
    assert_eq!(r.verdict, Verdict::BoundRespected, "{r:#?}");
    assert_eq!(r.comparisons.len(), 5);
}

#[test]
fn weighted_difference_is_pathwise_nonincreasing_without_reaction() {
    // With L = 0 and β = 0 the weight absorbs the convective growth exactly.
    let p = ModelParams::new(1.0, 1.0, 0.0, 0.5).unwrap();
    let s = setup(0.5, 16, 1e-3, 1.0).with_params(p);
    for i in 0..50 {
        let w = weighted_difference_path(&s, &u0(), &v0(), i).unwrap();
        for (k, pair) in w.windows(2).enumerate() {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "path {i} step {k}: {} -> {}", pair[0], pair[1]);
        }
    }
}

#[test]
fn limit_with_vanishing_coefficient_is_exact() {
    let s = setup(0.5, 8, 1e-2, 0.5);
    for limit in [Limit::BetaToZero, Limit::AlphaToZero] {
        let path = coupled_limit_path(&s, limit, 0.0, &u0(), 3).unwrap().unwrap();
        assert_eq!(path.weighted_error, 0.0);
    }
}

#[test]
fn inviscid_sweep_rejects_bad_inputs() {
    let s = setup(0.5, 8, 1e-2, 0.5);
    let cfg = |values: Vec<f64>| InviscidConfig { limit: Limit::BetaToZero, values, u0: u0(), ensemble: 2 };
    assert!(inviscid_limit_sweep(&s, &cfg(vec![0.1, 0.2])).is_err());
    assert!(inviscid_limit_sweep(&s, &cfg(vec![0.1, 0.0])).is_err());
    let mult = s.with_noise(NoiseCoefficient::multiplicative(0.5, 0.5).unwrap());
    assert!(inviscid_limit_sweep(&mult, &cfg(vec![0.2, 0.1])).is_err());
}

#[test]
fn beta_bound_is_linear_in_beta_up_to_moments() {
    let s = setup(0.5, 16, 1e-3, 1.0);
    let r = inviscid_limit_sweep(
        &s,
        &InviscidConfig { limit: Limit::BetaToZero, values: vec![0.2, 0.1], u0: u0(), ensemble: 50 },
    )
    .unwrap();
    let b1 = r.get("error bound at 0.2").unwrap().value;
    let b2 = r.get("error bound at 0.1").unwrap().value;
    // Halving β roughly halves the bound; the moments and e^{βT} shift it only slightly.
    assert!(b1 / b2 > 1.7 && b1 / b2 < 2.6, "ratio {}", b1 / b2);
    assert_eq!(r.verdict, Verdict::BoundRespected, "{r:#?}");
}

#[test]
fn exit_probability_is_one_inside_the_initial_norm() {
    let s = setup(0.5, 4, 1e-2, 0.2);
    let u0 = SpectralField::new(vec![1.0]).unwrap();
    let r = exit_time_tail(&s, &ExitTailConfig { radii: vec![0.5], u0, ensemble: 20, dt_halving: false }).unwrap();
    assert_eq!(r.get("exceedance probability at R=0.5").unwrap().value, 1.0);
}

#[test]
fn exit_tail_requires_additive_noise() {
    let s = setup(0.5, 4, 1e-2, 0.2).with_noise(NoiseCoefficient::multiplicative(0.5, 0.1).unwrap());
    let cfg = ExitTailConfig { radii: vec![0.5], u0: SpectralField::zeros(4), ensemble: 2, dt_halving: false };
    assert!(matches!(exit_time_tail(&s, &cfg), Err(EstimatesError::Precondition(_))));
}

#[test]
fn exit_tail_on_a_two_mode_system_with_many_paths() {
    let s = setup(1.0, 2, 1e-3, 1.0);
    let radii = vec![0.6, 0.75, 0.9];
    let r = exit_time_tail(&s, &ExitTailConfig { radii: radii.clone(), u0: SpectralField::zeros(2), ensemble: 100_000, dt_halving: false })
        .unwrap();
    let logs: Vec<f64> = radii
        .iter()
        .map(|r0| -r.get(&format!("exceedance probability at R={r0}")).unwrap().value.ln())
        .collect();
    assert!(logs.windows(2).all(|w| w[1] > w[0]), "{logs:?}");
    assert!(r.comparisons.iter().filter(|c| c.label.starts_with("tail bound")).all(|c| c.holds));
    assert!(r.get("fitted quadratic coefficient b").unwrap().value > 0.0);
}

#[test]
fn exponential_moment_rejects_epsilon_above_cap() {
    let s = setup(0.5, 8, 1e-2, 0.5);
    let cap = MomentBudget::new(&s, 1.0).unwrap().epsilon_cap;
    let cfg = MomentConfig { epsilon: Some(cap * 1.01), u0: u0(), ensemble: 2, checkpoints: 5 };
    match exponential_moment_check(&s, &cfg) {
        Err(EstimatesError::Precondition(m)) => assert!(m.contains("exceeds")),
        other => panic!("expected a precondition error, got {other:?}"),
    }
}

#[test]
fn exponential_moment_cap_matches_formula() {
    let s = setup(0.5, 16, 1e-2, 0.5);
    let b = MomentBudget::new(&s, 1.0).unwrap();
    let q = 0.25; // a₀² μ₁
    assert!((b.epsilon_cap - (PI_SQ - 1.25) / (2.0 * q)).abs() < 1e-12);
    let tr: f64 = 0.25 * (1..=16).map(|k| 1.0 / (k * k) as f64).sum::<f64>();
    assert!((b.m - (1.25 + 2.0 * tr)).abs() < 1e-12);
    let kappa = PI_SQ - 0.625 - std::f64::consts::FRAC_1_SQRT_2 * tr;
    assert!((b.kappa_hat - kappa).abs() < 1e-12);
}

#[test]
fn exponential_moment_without_noise_has_slack() {
    let s = setup(0.0, 8, 1e-3, 1.0);
    let cfg = MomentConfig { epsilon: Some(1.0), u0: u0(), ensemble: 2, checkpoints: 5 };
    let r = exponential_moment_check(&s, &cfg).unwrap();
    for c in &r.comparisons {
        assert!(c.bound / c.empirical >= 1.0, "{c:?}");
    }
}

#[test]
fn exponential_moment_at_cap_holds() {
    let s = setup(0.5, 16, 1e-3, 1.0);
    let r = exponential_moment_check(&s, &MomentConfig { epsilon: None, u0: u0(), ensemble: 200, checkpoints: 5 }).unwrap();
    assert_eq!(r.verdict, Verdict::BoundRespected, "{r:#?}");
}

#[test]
fn stability_of_equal_starts_is_zero() {
    let s = setup(0.5, 8, 1e-2, 0.5);
    let r = stability_decay(&s, &StabilityConfig { u0: u0(), v0: u0(), ensemble: 4, checkpoints: 5 }).unwrap();
    assert!(r.comparisons.iter().all(|c| c.empirical == 0.0));
}

#[test]
fn stability_rate_in_the_linear_case_is_twice_the_first_eigenvalue() {
    let p = ModelParams::new(1.0, 0.0, 0.0, 0.5).unwrap();
    let s = setup(0.5, 16, 1e-4, 1.0).with_params(p);
    let r = stability_decay(&s, &StabilityConfig { u0: u0(), v0: v0(), ensemble: 4, checkpoints: 5 }).unwrap();
    let rate = r.get("fitted decay rate").unwrap().value;
    assert!((rate / (2.0 * lambda(1)) - 1.0).abs() < 0.05, "rate {rate}");
    assert_eq!(r.verdict, Verdict::BoundRespected);
}

#[test]
fn stability_rejects_inadmissible_parameters() {
    let p = ModelParams::new(0.05, 1.0, 1.0, 0.5).unwrap();
    let s = setup(0.5, 8, 1e-2, 0.5).with_params(p);
    assert!(stability_decay(&s, &StabilityConfig { u0: u0(), v0: v0(), ensemble: 2, checkpoints: 5 }).is_err());
}

#[test]
fn stability_bound_holds_for_default_parameters() {
    let s = setup(0.5, 16, 1e-3, 1.0);
    let r = stability_decay(&s, &StabilityConfig { u0: u0(), v0: v0(), ensemble: 100, checkpoints: 5 }).unwrap();
    assert_eq!(r.verdict, Verdict::BoundRespected, "{r:#?}");
    let rate = r.get("fitted decay rate").unwrap().value;
    assert!(rate >= r.get("kappa hat").unwrap().value);
}

fn ou_setup() -> Setup {
    setup(1.0, 16, 2f64.powi(-15), 1.0).with_params(ModelParams::new(1.0, 0.0, 0.0, 0.5).unwrap())
}

#[test]
fn ou_mode_variances_match_closed_form() {
    let cfg = InvariantConfig {
        burn_in: Some(1.0),
        sample_stride: Some(32),
        n_samples: 32768,
        observables: (1..=4).map(|k| Observable::ModeSquared { k }).collect(),
        ensemble: 50,
        batches: 32,
        mixing_horizon: 0.5,
        mixing_ensemble: 0,
        far_start: 5.0,
        epsilon_fraction: 0.25,
    };
    let r = invariant_measure_suite(&ou_setup(), &cfg).unwrap();
    for k in 1..=4 {
        let c = r.comparison(&format!("stationary variance of mode {k}")).unwrap();
        assert!(c.holds, "{c:?}");
        let target = 1.0 / ((k * k) as f64 * 2.0 * lambda(k));
        assert!((r.get(&format!("stationary variance of mode {k}")).unwrap().value - target).abs() < 1e-15);
    }
}

#[test]
fn two_start_gap_is_largest_at_the_start() {
    let s = setup(0.5, 16, 1e-3, 1.0);
    let cfg = InvariantConfig {
        burn_in: None,
        sample_stride: None,
        n_samples: 2000,
        observables: vec![Observable::L2Squared],
        ensemble: 50,
        batches: 20,
        mixing_horizon: 1.0,
        mixing_ensemble: 50,
        far_start: 5.0,
        epsilon_fraction: 0.25,
    };
    let r = invariant_measure_suite(&s, &cfg).unwrap();
    let g0 = r.get("two-start gap at t=0").unwrap().value;
    let g1 = r.get("two-start gap at the horizon").unwrap().value;
    assert_eq!(g0, 25.0);
    assert!(g1 < 1e-3 * g0);
    assert!(r.get("two-start gap decay rate").unwrap().value > 0.0);
}

#[test]
fn invariant_suite_rejects_non_dissipative_parameters() {
    let p = ModelParams::new(0.01, 1.0, 1.0, 0.5).unwrap();
    let s = setup(0.5, 8, 1e-2, 0.5).with_params(p);
    let cfg = InvariantConfig {
        burn_in: Some(0.1),
        sample_stride: Some(1),
        n_samples: 100,
        observables: vec![Observable::L2Squared],
        ensemble: 2,
        batches: 10,
        mixing_horizon: 0.1,
        mixing_ensemble: 0,
        far_start: 5.0,
        epsilon_fraction: 0.25,
    };
    assert!(invariant_measure_suite(&s, &cfg).is_err());
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let s = setup(0.5, 8, 1e-2, 0.5).with_noise(NoiseCoefficient::multiplicative(0.5, 0.5).unwrap());
    let cfg = UniquenessConfig { u0: u0(), v0: v0(), ensemble: 40, checkpoints: 5 };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&verify_uniqueness_contraction(&s, &cfg).unwrap()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(8));
}
