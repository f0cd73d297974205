use bhlab_solver::{BlowUp, Stepper};
use bhlab_spectral::lambda;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport, Provenance, Relation};
use crate::setup::{blowup_note, h1_sq, l2_sq};
use crate::stats::{autocorrelation_time, batch_means, linear_fit, mean_se, KahanSum, MeanSe};
use crate::{par_map, precondition, EstimatesError, MomentBudget, Setup};

/// Functional `φ(u)` averaged in time and over the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    L2Squared,
    H1Squared,
    /// Square of the `k`-th coefficient (1-based).
    ModeSquared { k: usize },
}

impl Observable {
    pub fn eval(&self, a: &[f64], lambdas: &[f64]) -> f64 {
        match *self {
            Observable::L2Squared => l2_sq(a),
            Observable::H1Squared => h1_sq(a, lambdas),
            Observable::ModeSquared { k } => a.get(k - 1).map_or(0.0, |x| x * x),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Observable::L2Squared => "L2 norm squared".into(),
            Observable::H1Squared => "H1 norm squared".into(),
            Observable::ModeSquared { k } => format!("mode {k} squared"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantConfig {
    /// Defaults to `5/κ̂` when `κ̂ > 0`, else 10 time units.
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Steps between samples; defaults to the integrated autocorrelation time of `‖u‖²`.
    #[serde(default)]
    pub sample_stride: Option<usize>,
    pub n_samples: usize,
    pub observables: Vec<Observable>,
    /// Independent paths for the late-time ensemble average.
    pub ensemble: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Horizon and ensemble size of the two-start mixing experiment.
    pub mixing_horizon: f64,
    pub mixing_ensemble: usize,
    #[serde(default = "default_far_start")]
    pub far_start: f64,
    /// `ε` for the `exp(ε‖u‖²)` moment as a fraction of the admissible cap.
    #[serde(default = "default_fraction")]
    pub epsilon_fraction: f64,
}

fn default_batches() -> usize {
    20
}

fn default_far_start() -> f64 {
    5.0
}

fn default_fraction() -> f64 {
    0.25
}

fn joint(a: MeanSe, b: MeanSe) -> f64 {
    (a.se * a.se + b.se * b.se).sqrt()
}

fn solver_for(setup: &Setup, steps: usize) -> Result<Setup, EstimatesError> {
    let dt = setup.solver.dt;
    Ok(setup.with_solver(setup.solver.with_t_end(steps.max(1) as f64 * dt)?))
}

/// Samples `‖u‖²` from a pilot path and returns the autocorrelation time in steps.
fn pilot_stride(setup: &Setup, burn_steps: usize) -> Result<usize, EstimatesError> {
    let p = &setup.params;
    let dt = setup.solver.dt;
    let relax = 1.0 / (2.0 * p.nu * lambda(1));
    let pilot_steps = ((40.0 * relax / dt).ceil() as usize).max(256);
    let thin = (pilot_steps / 4096).max(1);
    let cfg = solver_for(setup, burn_steps + pilot_steps)?;
    let mut st = cfg.stepper()?;
    st.set_track_l4(false);
    let mut series = Vec::new();
    let mut rng = setup.rng(usize::MAX);
    let zero = vec![0.0; setup.solver.n_modes];
    st.run(&zero, &mut rng, |n, _, a, _| {
        if n >= burn_steps && (n - burn_steps) % thin == 0 {
            series.push(l2_sq(a));
        }
    })
    .map_err(|b| EstimatesError::Precondition(format!("pilot path blew up at t = {}", b.time)))?;
    Ok(((autocorrelation_time(&series) * thin as f64).ceil() as usize).max(1))
}

/// Ergodicity, mixing and the invariant exponential moment under additive noise.
pub fn invariant_measure_suite(setup: &Setup, cfg: &InvariantConfig) -> Result<ExperimentReport, EstimatesError> {
    let p = setup.params;
    if !p.admits_invariant_measure() {
        return precondition("need nu > beta(1+gamma^2)/(2 pi^2) for an invariant measure");
    }
    let budget = MomentBudget::new(setup, cfg.epsilon_fraction)?;
    if cfg.n_samples < 2 * cfg.batches || cfg.batches < 2 {
        return precondition("need at least two batches and two samples per batch");
    }
    if cfg.observables.is_empty() || cfg.ensemble < 2 {
        return precondition("need at least one observable and two ensemble paths");
    }
    if let Some(Observable::ModeSquared { k }) = cfg
        .observables
        .iter()
        .find(|o| matches!(o, Observable::ModeSquared { k } if *k == 0 || *k > setup.solver.n_modes))
    {
        return precondition(format!("mode {k} is outside 1..={}", setup.solver.n_modes));
    }
    let dt = setup.solver.dt;
    let burn_in = cfg.burn_in.unwrap_or(if budget.kappa_hat > 0.0 { 5.0 / budget.kappa_hat } else { 10.0 });
    let burn_steps = (burn_in / dt).round() as usize;
    let stride = match cfg.sample_stride {
        Some(s) if s > 0 => s,
        Some(_) => return precondition("sample stride must be positive"),
        None => pilot_stride(setup, burn_steps)?,
    };
    let lambdas = setup.lambdas();
    let linear = p.alpha == 0.0 && p.beta == 0.0;
    let n_obs = cfg.observables.len();
    let n = setup.solver.n_modes;
    let zero = vec![0.0; n];

    let mut report = ExperimentReport::new(
        "invariant",
        "ergodicity, strong mixing and exponential moments of the invariant measure",
        setup.snapshot(cfg),
        cfg.n_samples + cfg.ensemble + cfg.mixing_ensemble,
    );
    report.parameter("burn-in", burn_in);
    report.parameter("sample stride", stride as f64);
    report.parameter("kappa hat", budget.kappa_hat);

    // One long path: columns 0..n_obs are observables, the last is ‖u‖².
    let long = solver_for(setup, burn_steps + cfg.n_samples * stride)?;
    let mut st = long.stepper()?;
    st.set_track_l4(false);
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_samples); n_obs + 1];
    let mut rng = setup.rng(0);
    let run = st.run(&zero, &mut rng, |k, _, a, _| {
        if k > burn_steps && (k - burn_steps) % stride == 0 {
            for (col, o) in samples.iter_mut().zip(&cfg.observables) {
                col.push(o.eval(a, &lambdas));
            }
            samples[n_obs].push(l2_sq(a));
        }
    });
    if let Err(b) = run {
        report.inconclusive(format!("long path blew up at t = {}", b.time));
        return Ok(report);
    }

    // Late-time ensemble from the zero state.
    let late = solver_for(setup, burn_steps)?;
    let mut template = late.stepper()?;
    template.set_track_l4(false);
    let finals: Vec<Result<Vec<f64>, BlowUp>> = par_map(
        cfg.ensemble,
        || template.clone(),
        |st, i| {
            let mut rng = setup.rng(1 + i);
            let a = st.run(&zero, &mut rng, |_, _, _, _| {})?;
            Ok(cfg.observables.iter().map(|o| o.eval(&a, &lambdas)).collect())
        },
    );
    let ok: Vec<&Vec<f64>> = finals.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.len() < finals.len() {
        report.inconclusive(blowup_note(finals.len() - ok.len(), finals.len()));
    }
    if ok.len() < 2 {
        return Ok(report);
    }

    let half_batches = (cfg.batches / 2).max(2);
    for (j, obs) in cfg.observables.iter().enumerate() {
        let label = obs.label();
        let col = &samples[j];
        let time_avg = batch_means(col, cfg.batches);
        let ens = mean_se(&ok.iter().map(|v| v[j]).collect::<Vec<_>>());
        report.empirical(format!("time average of {label}"), time_avg.mean, time_avg.se);
        report.empirical(format!("ensemble average of {label}"), ens.mean, ens.se);
        report.compare(Comparison::new(
            format!("time vs ensemble average of {label}"),
            (time_avg.mean - ens.mean).abs(),
            joint(time_avg, ens),
            Relation::AtMost,
            0.0,
            3.0,
        ));
        let (a, b) = col.split_at(col.len() / 2);
        let (ha, hb) = (batch_means(a, half_batches), batch_means(b, half_batches));
        if (ha.mean - hb.mean).abs() > 5.0 * joint(ha, hb) {
            report.inconclusive(format!("non-stationary time average of {label}"));
        }
        if let (true, Observable::ModeSquared { k }) = (linear, obs) {
            if let Ok(q) = setup.additive_covariance() {
                let target = q.mus().get(k - 1).copied().unwrap_or(0.0) / (2.0 * p.nu * lambda(*k));
                report.bound(format!("stationary variance of mode {k}"), target);
                report.compare(Comparison::new(
                    format!("stationary variance of mode {k}"),
                    (time_avg.mean - target).abs(),
                    time_avg.se,
                    Relation::AtMost,
                    0.0,
                    3.0,
                ));
            }
        }
    }

    // Exponential moment of the invariant samples, compared between halves.
    if budget.epsilon > 0.0 {
        let e: Vec<f64> = samples[n_obs].iter().map(|x| (budget.epsilon * x).exp()).collect();
        let all = batch_means(&e, cfg.batches);
        let (a, b) = e.split_at(e.len() / 2);
        let (ha, hb) = (batch_means(a, half_batches), batch_means(b, half_batches));
        report.parameter("epsilon for the invariant moment", budget.epsilon);
        report.empirical("invariant exponential moment", all.mean, all.se);
        report.empirical("invariant exponential moment, first half", ha.mean, ha.se);
        report.empirical("invariant exponential moment, second half", hb.mean, hb.se);
        report.compare(Comparison::new(
            "invariant exponential moment stable under doubling",
            (ha.mean - hb.mean).abs(),
            joint(ha, hb),
            Relation::AtMost,
            0.0,
            3.0,
        ));
    }

    if MomentBudget::stability_condition(setup)? && cfg.mixing_ensemble > 0 {
        mixing(setup, cfg, &mut report)?;
    } else {
        report.note("mixing check skipped: stability condition does not hold or no mixing ensemble");
    }
    Ok(report)
}

/// Two synchronously coupled ensembles from `0` and `far_start·e₁`.
fn mixing(setup: &Setup, cfg: &InvariantConfig, report: &mut ExperimentReport) -> Result<(), EstimatesError> {
    let dt = setup.solver.dt;
    let steps = ((cfg.mixing_horizon / dt).round() as usize).max(4);
    let mset = solver_for(setup, steps)?;
    let record = (steps / 64).max(1);
    let n = setup.solver.n_modes;
    let lambdas = setup.lambdas();
    let obs = cfg.observables[0];
    let mut far = vec![0.0; n];
    far[0] = cfg.far_start;
    let zero = vec![0.0; n];
    let mut template: Stepper = mset.stepper()?;
    template.set_track_l4(false);
    let offset = 1 + cfg.ensemble;
    let diffs: Vec<Result<Vec<f64>, BlowUp>> = par_map(
        cfg.mixing_ensemble,
        || template.clone(),
        |st, i| {
            let mut rng = setup.rng(offset + i);
            let mut out = Vec::new();
            st.run_coupled(&zero, &far, &mut rng, |k, _, (a, _), (b, _)| {
                if k % record == 0 {
                    out.push(obs.eval(a, &lambdas) - obs.eval(b, &lambdas));
                }
            })?;
            Ok(out)
        },
    );
    let ok: Vec<&Vec<f64>> = diffs.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.len() < diffs.len() {
        report.inconclusive(blowup_note(diffs.len() - ok.len(), diffs.len()));
    }
    if ok.is_empty() {
        return Ok(());
    }
    let gaps: Vec<f64> = (0..ok[0].len())
        .map(|k| {
            let mut s = KahanSum::default();
            ok.iter().for_each(|v| s.add(v[k]));
            (s.value() / ok.len() as f64).abs()
        })
        .collect();
    let times: Vec<f64> = (0..gaps.len()).map(|k| (k * record) as f64 * dt).collect();
    report.empirical("two-start gap at t=0", gaps[0], 0.0);
    report.empirical("two-start gap at the horizon", *gaps.last().unwrap(), 0.0);
    let half = times.last().unwrap() / 2.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&gaps).filter(|(t, g)| **t >= half && **g > 0.0).map(|(t, g)| (*t, g.ln())).unzip();
    if xs.len() < 3 {
        report.inconclusive("two-start gap vanished before the second half of the horizon");
        return Ok(());
    }
    let fit = linear_fit(&xs, &ys);
    report.quantity("two-start gap decay rate", -fit.slope, Provenance::Fitted, Some(fit.slope_se));
    report.compare(Comparison::new("two-start gap decays", -fit.slope, fit.slope_se, Relation::AtLeast, 0.0, 0.0));
    Ok(())
}
