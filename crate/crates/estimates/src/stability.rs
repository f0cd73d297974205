use bhlab_solver::BlowUp;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport, Provenance};
use crate::setup::{blowup_note, diff_sq};
use crate::stats::{linear_fit, mean_se, KahanSum};
use crate::{checkpoint_steps, par_map, precondition, EstimatesError, MomentBudget, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub u0: SpectralField,
    pub v0: SpectralField,
    pub ensemble: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

fn default_checkpoints() -> usize {
    5
}

/// Points kept per path for the rate fit.
const FIT_POINTS: usize = 512;

/// Exponential stability of two solutions under additive noise:
/// `E‖u(t) − v(t)‖² ≤ ‖u₀ − v₀‖² e^{Cα²‖u₀‖²/ν²} e^{−κ̂t}`.
pub fn stability_decay(setup: &Setup, cfg: &StabilityConfig) -> Result<ExperimentReport, EstimatesError> {
    if !MomentBudget::stability_condition(setup)? {
        return precondition(
            "need nu > beta(1+gamma^2)/pi^2 and nu^3 pi^2 - beta(1+gamma^2) nu^2 >= 2 C alpha^2 Tr Q",
        );
    }
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    let budget = MomentBudget::new(setup, 1.0)?;
    let n_steps = setup.solver.n_steps();
    let stride = (n_steps / FIT_POINTS).max(1);
    let record: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    let checks = checkpoint_steps(n_steps, cfg.checkpoints);
    let template = setup.stepper()?;
    let paths: Vec<Result<(Vec<f64>, Vec<f64>), BlowUp>> = par_map(
        cfg.ensemble,
        || template.clone(),
        |st, i| {
            let mut rng = setup.rng(i);
            let mut series = Vec::with_capacity(record.len());
            let mut at = vec![0.0; checks.len()];
            st.run_coupled(cfg.u0.coeffs(), cfg.v0.coeffs(), &mut rng, |n, _, (a, _), (b, _)| {
                let d = diff_sq(a, b);
                if n % stride == 0 {
                    series.push(d);
                }
                if let Ok(j) = checks.binary_search(&n) {
                    at[j] = d;
                }
            })?;
            Ok((series, at))
        },
    );
    let ok: Vec<&(Vec<f64>, Vec<f64>)> = paths.iter().filter_map(|r| r.as_ref().ok()).collect();

    let mut report = ExperimentReport::new(
        "stability",
        "exponential stability of solutions under additive noise",
        setup.snapshot(cfg),
        cfg.ensemble,
    );
    let p = &setup.params;
    let n = setup.solver.n_modes;
    let u0 = cfg.u0.resized(n);
    let w0 = u0.sub(&cfg.v0.resized(n)).l2_sq();
    let c = setup.embedding_constant;
    let prefactor = w0 * (c * p.alpha * p.alpha * u0.l2_sq() / (p.nu * p.nu)).exp();
    report.parameter("kappa hat", budget.kappa_hat);
    report.parameter("kappa hat with C=0", budget.kappa_hat_c0);
    report.parameter("initial difference squared", w0);
    if ok.len() < paths.len() {
        report.inconclusive(blowup_note(paths.len() - ok.len(), paths.len()));
    }
    if ok.is_empty() {
        return Ok(report);
    }
    for (j, &s) in checks.iter().enumerate() {
        let t = setup.solver.time(s);
        let m = mean_se(&ok.iter().map(|x| x.1[j]).collect::<Vec<_>>());
        let bound = prefactor * (-budget.kappa_hat * t).exp();
        report.empirical(format!("mean squared difference at t={t}"), m.mean, m.se);
        report.bound(format!("stability bound at t={t}"), bound);
        report.compare(Comparison::at_most(format!("stability at t={t}"), m.mean, m.se, bound));
    }

    // Least squares on log E‖w‖² over the second half of the horizon.
    let half = setup.solver.t_end / 2.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, &s) in record.iter().enumerate() {
        let t = setup.solver.time(s);
        if t < half {
            continue;
        }
        let mut acc = KahanSum::default();
        ok.iter().for_each(|x| acc.add(x.0[k]));
        let mean = acc.value() / ok.len() as f64;
        if mean > 0.0 && mean.is_finite() {
            xs.push(t);
            ys.push(mean.ln());
        }
    }
    if w0 > 0.0 {
        if xs.len() >= 3 {
            let fit = linear_fit(&xs, &ys);
            let rate = -fit.slope;
            report.quantity("fitted decay rate", rate, Provenance::Fitted, Some(fit.slope_se));
            report.compare(Comparison::new(
                "fitted rate at least kappa hat",
                rate,
                fit.slope_se,
                crate::Relation::AtLeast,
                budget.kappa_hat,
                2.0,
            ));
        } else {
            report.inconclusive("too few positive means in the second half for a rate fit");
        }
    }
    Ok(report)
}
