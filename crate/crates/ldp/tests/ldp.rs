use bhlab_estimates::{Setup, Verdict};
use bhlab_ldp::*;
use bhlab_noise::{stream, CovarianceSpec, NoiseCoefficient};
use bhlab_solver::{integrate, SolverConfig};
use bhlab_spectral::{lambda, ModelParams, SpectralField};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn field(c: &[f64]) -> SpectralField {
    SpectralField::new(c.to_vec()).unwrap()
}

fn spec(n: usize) -> CovarianceSpec {
    CovarianceSpec::power_law(n, 2.0).unwrap()
}

fn burgers_huxley() -> ModelParams {
    ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap()
}

fn heat() -> ModelParams {
    ModelParams::new(1.0, 0.0, 0.0, 0.5).unwrap()
}

fn sup_diff(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.sub(y).l2()).fold(0.0, f64::max)
}

#[test]
fn zero_control_costs_nothing() {
    let h = ControlPath::zero(1.0, 4, 3).unwrap();
    assert_eq!(rate_cost(&h, &spec(3)).unwrap(), 0.0);
    assert!(h.is_zero());
}

#[test]
fn constant_single_mode_cost() {
    let c = 0.7;
    let s = spec(4);
    let h = ControlPath::uniform(2.0, vec![field(&[c, 0.0]); 3]).unwrap();
    let want = 0.5 * 2.0 * c * c / s.mus()[0];
    assert!((rate_cost(&h, &s).unwrap() - want).abs() < 1e-14);
}

#[test]
fn cost_matches_dense_quadrature() {
    let s = spec(6);
    let mut rng = stream(11, 0);
    // Breakpoints on a dyadic grid so a fine uniform midpoint rule is exact.
    let fine = 4096usize;
    for _ in 0..20 {
        let m = rng.random_range(1..=10usize);
        let mut cuts: Vec<usize> = (0..m - 1).map(|_| rng.random_range(1..64usize)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut bp = vec![0.0];
        bp.extend(cuts.iter().map(|c| *c as f64 / 64.0));
        bp.push(1.0);
        let values: Vec<SpectralField> = (0..bp.len() - 1)
            .map(|_| field(&(0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>()))
            .collect();
        let h = ControlPath::new(bp, values).unwrap();
        let dx = 1.0 / fine as f64;
        let oracle: f64 = (0..fine)
            .map(|i| {
                let v = h.value_at((i as f64 + 0.5) * dx);
                0.5 * dx * v.coeffs().iter().zip(s.mus()).map(|(x, mu)| x * x / mu).sum::<f64>()
            })
            .sum();
        let got = rate_cost(&h, &s).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle.max(1.0), "{got} vs {oracle}");
    }
}

#[test]
fn control_outside_noise_support_has_infinite_cost() {
    let h = ControlPath::uniform(1.0, vec![field(&[0.0, 0.0, 1.0])]).unwrap();
    assert!(matches!(rate_cost(&h, &spec(2)), Err(LdpError::InfiniteCost { mode: 3 })));
    let harmless = ControlPath::uniform(1.0, vec![field(&[1.0, 0.0, 0.0])]).unwrap();
    assert!(rate_cost(&harmless, &spec(2)).is_ok());
}

proptest! {
    #[test]
    fn cost_is_a_quadratic_form(
        vals in proptest::collection::vec(-3.0f64..3.0, 12),
        c in -5.0f64..5.0,
    ) {
        let s = spec(4);
        let h = ControlPath::uniform(1.5, vals.chunks(4).map(field).collect()).unwrap();
        let base = rate_cost(&h, &s).unwrap();
        let scaled = rate_cost(&h.scaled(c), &s).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (1.0 + c * c * base));
        prop_assert!(base >= 0.0);
        prop_assert_eq!(base == 0.0, h.is_zero());
    }
}

#[test]
fn zero_control_reproduces_the_deterministic_flow() {
    let cfg = SolverConfig::new(8, 1e-3, 0.5).unwrap();
    let u0 = field(&[0.5, 0.2, 0.1]);
    let p = burgers_huxley();
    let h = ControlPath::zero(0.5, 4, 8).unwrap();
    let eval = theta_of_control(&h, &u0, &p, &spec(8), &cfg).unwrap();
    let quiet = NoiseCoefficient::additive(0.0).unwrap();
    let flow = integrate(&u0, &cfg, &p, &quiet, &spec(8), &mut stream(0, 0)).unwrap();
    assert_eq!(eval.cost, 0.0);
    assert!(eval.skeleton.states.iter().all(|z| z.l2_sq() == 0.0));
    assert_eq!(eval.image.states, flow.states);
}

#[test]
fn linear_image_is_heat_flow_plus_skeleton() {
    let n = 6;
    let cfg = SolverConfig::new(n, 1e-3, 0.5).unwrap();
    let u0 = field(&[0.3, -0.2, 0.1, 0.05]);
    let h = ControlPath::uniform(0.5, vec![field(&[1.0, 0.5]), field(&[-0.5, 2.0])]).unwrap();
    let eval = theta_of_control(&h, &u0, &heat(), &spec(n), &cfg).unwrap();
    let free = theta_of_control(&ControlPath::zero(0.5, 1, 2).unwrap(), &u0, &heat(), &spec(n), &cfg).unwrap();
    for (step, (img, z)) in eval.image.states.iter().zip(&eval.skeleton.states).enumerate() {
        let heat_flow: Vec<f64> = (0..n)
            .map(|k| {
                let c = u0.coeffs().get(k).copied().unwrap_or(0.0);
                c * (1.0 + cfg.dt * lambda(k + 1)).powi(-(step as i32))
            })
            .collect();
        let want = z.add(&field(&heat_flow));
        assert!(img.sub(&want).l2() < 1e-13, "step {step}");
        assert!(free.image.states[step].sub(&field(&heat_flow)).l2() < 1e-13);
    }
}

#[test]
fn image_shift_scales_linearly_in_the_control_perturbation() {
    let n = 8;
    let cfg = SolverConfig::new(n, 1e-3, 0.5).unwrap();
    let u0 = field(&[0.5, 0.2, 0.1]);
    let p = burgers_huxley();
    let h = ControlPath::uniform(0.5, vec![field(&[1.0, 0.5, 0.0]), field(&[0.0, -1.0, 0.5])]).unwrap();
    let g = ControlPath::uniform(0.5, vec![field(&[0.3, -0.7, 1.0]), field(&[1.0, 0.2, -0.4])]).unwrap();
    let base = theta_of_control(&h, &u0, &p, &spec(n), &cfg).unwrap();
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&d| {
            let vals = h.values().iter().zip(g.values()).map(|(a, b)| a.axpy(d, b)).collect();
            let hp = ControlPath::new(h.breakpoints().to_vec(), vals).unwrap();
            let pert = theta_of_control(&hp, &u0, &p, &spec(n), &cfg).unwrap();
            sup_diff(&pert.image.states, &base.image.states) / d
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!(lo > 0.0 && hi / lo <= 2.0, "{ratios:?}");
}

fn budget(evals: usize) -> MinimizerBudget {
    MinimizerBudget { max_evaluations: evals, ..Default::default() }
}

#[test]
fn linear_minimizer_matches_the_gramian() {
    let n = 8;
    let cfg = SolverConfig::new(n, 1e-3, 1.0).unwrap();
    let s = spec(n);
    let r = 0.17;
    let m = MinimizeConfig { radius: r, u0: SpectralField::zeros(n), budget: budget(4000) };
    let out = minimize_rate_to_exit(&m, &heat(), &s, &cfg).unwrap();
    let j = linear_exit_cost(r, s.mus()[0], 1.0, 1, 1.0);
    assert_eq!(out.status, MinimizerStatus::Feasible);
    assert!(out.is_upper_bound && out.certificate_verified);
    // The implicit scheme's discrete Gramian is slightly larger than the continuous one.
    assert!(out.j_hat >= 0.99 * j, "{} vs {j}", out.j_hat);
    assert!(out.j_hat <= 1.05 * j, "{} vs {j}", out.j_hat);
}

#[test]
fn gramian_closed_form() {
    let (mu, nu, t) = (0.25, 0.5, 2.0);
    let a = nu * lambda(2);
    // ∫₀ᵀ μ e^{−2a(T−s)} ds by composite Simpson.
    let m = 2000;
    let hstep = t / m as f64;
    let f = |s: f64| mu * (-2.0 * a * (t - s)).exp();
    let simpson: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(i as f64 * hstep)
        })
        .sum::<f64>()
        * hstep
        / 3.0;
    assert!((heat_gramian(mu, nu, 2, t) - simpson).abs() < 1e-9);
    assert!((linear_exit_cost(0.3, mu, nu, 2, t) - 0.09 / (2.0 * simpson)).abs() < 1e-6);
}

#[test]
fn radius_inside_the_free_flow_is_trivial() {
    let n = 8;
    let cfg = SolverConfig::new(n, 1e-3, 0.5).unwrap();
    let u0 = field(&[0.5, 0.2, 0.1]);
    let m = MinimizeConfig { radius: 0.4, u0, budget: budget(100) };
    let out = minimize_rate_to_exit(&m, &burgers_huxley(), &spec(n), &cfg).unwrap();
    assert_eq!(out.status, MinimizerStatus::Trivial);
    assert_eq!(out.j_hat, 0.0);
    assert!(out.best.unwrap().control.is_zero());
    assert!(out.certificate_verified);
}

#[test]
fn larger_budget_never_raises_j_hat() {
    let n = 8;
    let cfg = SolverConfig::new(n, 1e-3, 0.5).unwrap();
    let run = |e| {
        let m = MinimizeConfig { radius: 0.3, u0: field(&[0.1]), budget: budget(e) };
        minimize_rate_to_exit(&m, &burgers_huxley(), &spec(n), &cfg).unwrap()
    };
    let mut prev = f64::INFINITY;
    for e in [25, 50, 100, 200] {
        let out = run(e);
        assert!(out.evaluations <= e);
        assert!(out.j_hat <= prev, "{} > {prev} at budget {e}", out.j_hat);
        prev = out.j_hat;
    }
}

#[test]
fn returned_control_reaches_the_sphere() {
    let n = 8;
    let cfg = SolverConfig::new(n, 1e-3, 1.0).unwrap();
    let s = spec(n);
    let m = MinimizeConfig { radius: 0.3, u0: SpectralField::zeros(n), budget: budget(300) };
    let out = minimize_rate_to_exit(&m, &burgers_huxley(), &s, &cfg).unwrap();
    let best = out.best.unwrap();
    assert!(out.certificate_verified);
    let again = theta_of_control(&best.control, &SpectralField::zeros(n), &burgers_huxley(), &s, &cfg).unwrap();
    assert!(again.image_sup() >= 0.3);
    assert_eq!(again.cost, out.j_hat);
    assert!((rate_cost(&best.control, &s).unwrap() - out.j_hat).abs() == 0.0);
}

#[test]
fn minimizer_rejects_bad_budgets() {
    let cfg = SolverConfig::new(4, 1e-2, 0.1).unwrap();
    let mk = |b: MinimizerBudget, r: f64| MinimizeConfig { radius: r, u0: SpectralField::zeros(4), budget: b };
    let p = burgers_huxley();
    let big = MinimizerBudget { intervals: 17, ..Default::default() };
    assert!(minimize_rate_to_exit(&mk(big, 1.0), &p, &spec(4), &cfg).is_err());
    let many = MinimizerBudget { intervals: 16, ..Default::default() };
    assert!(minimize_rate_to_exit(&mk(many, 1.0), &p, &spec(4), &cfg).is_err());
    assert!(minimize_rate_to_exit(&mk(budget(10), f64::NAN), &p, &spec(4), &cfg).is_err());
}

fn scaling_setup(n: usize, p: ModelParams, dt: f64, t_end: f64) -> Setup {
    let cfg = SolverConfig::new(n, dt, t_end).unwrap();
    Setup::new(p, NoiseCoefficient::additive(1.0).unwrap(), spec(n), cfg, 2024)
}

fn value(r: &bhlab_estimates::ExperimentReport, label: &str) -> f64 {
    r.get(label).unwrap_or_else(|| panic!("missing {label}")).value
}

#[test]
fn huge_noise_gives_vanishing_rate() {
    let setup = scaling_setup(4, burgers_huxley(), 1e-3, 0.2);
    let cfg = ScalingConfig {
        eps_values: vec![1e4],
        radius: 0.3,
        u0: SpectralField::zeros(4),
        ensemble: 200,
        budget: budget(50),
        j_hat: Some(1.0),
    };
    let r = small_noise_scaling(&setup, &cfg).unwrap();
    assert_eq!(value(&r, "exceedance probability at eps=10000"), 1.0);
    assert_eq!(value(&r, "L at eps=10000"), 0.0);
    assert_eq!(r.verdict, Verdict::BoundRespected);
}

/// Exact Gaussian transitions of one OU mode, monitored on the solver grid.
fn ou_exceedance(eps: f64, mu: f64, r: f64, dt: f64, steps: usize, paths: usize) -> (f64, f64) {
    let a = lambda(1);
    let decay = (-a * dt).exp();
    let sd = (eps * mu * (1.0 - decay * decay) / (2.0 * a)).sqrt();
    let mut hits = 0usize;
    for i in 0..paths {
        let mut rng = stream(99, i as u64);
        let mut x = 0.0f64;
        for _ in 0..steps {
            x = decay * x + sd * rng.sample::<f64, _>(StandardNormal);
            if x.abs() > r {
                hits += 1;
                break;
            }
        }
    }
    let p = hits as f64 / paths as f64;
    (p, (p * (1.0 - p) / paths as f64).sqrt())
}

#[test]
fn single_mode_linear_scaling_tracks_the_gramian() {
    let t_end = 0.1;
    let setup = scaling_setup(1, heat(), 1e-4, t_end);
    let eps = [0.3, 0.2, 0.15];
    let cfg = ScalingConfig {
        eps_values: eps.to_vec(),
        radius: 0.3,
        u0: SpectralField::zeros(1),
        ensemble: 20_000,
        budget: budget(400),
        j_hat: None,
    };
    let r = small_noise_scaling(&setup, &cfg).unwrap();
    let j = linear_exit_cost(0.3, 1.0, 1.0, 1, t_end);
    assert!((value(&r, "Gramian exit cost of mode 1") - j).abs() < 1e-15);
    let smallest = value(&r, "L at eps=0.15");
    assert!((smallest - j).abs() <= 0.25 * j, "L = {smallest}, J = {j}");
    assert_eq!(r.verdict, Verdict::BoundRespected);

    let (p_oracle, se_oracle) = ou_exceedance(0.2, 1.0, 0.3, 1e-4, 1000, 20_000);
    let got = r.get("exceedance probability at eps=0.2").unwrap();
    let joint = (se_oracle.powi(2) + got.standard_error.unwrap().powi(2)).sqrt();
    assert!((got.value - p_oracle).abs() <= 3.0 * joint, "{} vs {p_oracle}", got.value);
}

#[test]
fn scaling_on_the_nonlinear_model_is_monotone() {
    let setup = scaling_setup(8, burgers_huxley(), 1e-3, 1.0);
    let cfg = ScalingConfig {
        eps_values: vec![0.5, 0.25, 0.125],
        radius: 0.3,
        u0: SpectralField::zeros(8),
        ensemble: 1000,
        budget: budget(200),
        j_hat: None,
    };
    let r = small_noise_scaling(&setup, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::BoundRespected, "{:#?}", r.comparisons);
    let ls: Vec<f64> = [0.5, 0.25, 0.125].iter().map(|e| value(&r, &format!("L at eps={e}"))).collect();
    assert!(ls.windows(2).all(|w| w[1] > w[0]), "{ls:?}");
}

#[test]
fn scaling_preconditions() {
    let mut setup = scaling_setup(2, heat(), 1e-2, 0.1);
    let cfg = ScalingConfig {
        eps_values: vec![0.1, 0.2],
        radius: 0.3,
        u0: SpectralField::zeros(2),
        ensemble: 10,
        budget: budget(10),
        j_hat: Some(1.0),
    };
    assert!(small_noise_scaling(&setup, &cfg).is_err());
    setup.noise = NoiseCoefficient::multiplicative(0.5, 0.5).unwrap();
    let ok_eps = ScalingConfig { eps_values: vec![0.2, 0.1], ..cfg };
    assert!(matches!(small_noise_scaling(&setup, &ok_eps), Err(LdpError::Precondition(_))));
}

#[test]
fn control_paths_round_trip_through_json() {
    let h = ControlPath::new(vec![0.0, 0.25, 1.0], vec![field(&[1.0, -2.0]), field(&[0.5, 0.0])]).unwrap();
    let text = serde_json::to_string(&h).unwrap();
    let back: ControlPath = serde_json::from_str(&text).unwrap();
    assert_eq!(back, h);
    assert_eq!(back.interval_at(0.3), 1);
    for bad in [
        r#"{"breakpoints":[0.0,1.0,0.5],"values":[[1.0],[2.0]]}"#,
        r#"{"breakpoints":[0.1,1.0],"values":[[1.0]]}"#,
        r#"{"breakpoints":[0.0,1.0],"values":[[1.0],[2.0]]}"#,
    ] {
        assert!(serde_json::from_str::<ControlPath>(bad).is_err(), "{bad}");
    }
}
