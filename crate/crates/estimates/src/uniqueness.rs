use bhlab_solver::BlowUp;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport};
use crate::setup::{blowup_note, diff_sq, h1_sq};
use crate::stats::{mean_se, RunningTrapezoid};
use crate::{checkpoint_steps, par_map, precondition, EstimatesError, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessConfig {
    pub u0: SpectralField,
    pub v0: SpectralField,
    pub ensemble: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

fn default_checkpoints() -> usize {
    5
}

/// `e^{−ρ(t_n)}‖u(t_n) − v(t_n)‖²` at every step of path `index`, where
/// `ρ(t) = (Cα²/ν)∫₀ᵗ‖v‖²_{H¹}` by the trapezoid rule.
pub fn weighted_difference_path(
    setup: &Setup,
    u0: &SpectralField,
    v0: &SpectralField,
    index: usize,
) -> Result<Vec<f64>, EstimatesError> {
    let mut st = setup.stepper()?;
    let mut out = Vec::with_capacity(setup.solver.n_steps() + 1);
    run_weighted(setup, &mut st, u0, v0, index, |_, x| out.push(x)).map_err(|b| {
        EstimatesError::Precondition(format!("path blew up at t = {}", b.time))
    })?;
    Ok(out)
}

fn run_weighted(
    setup: &Setup,
    st: &mut bhlab_solver::Stepper,
    u0: &SpectralField,
    v0: &SpectralField,
    index: usize,
    mut sink: impl FnMut(usize, f64),
) -> Result<(), BlowUp> {
    let p = &setup.params;
    let coef = setup.embedding_constant * p.alpha * p.alpha / p.nu;
    let dt = setup.solver.dt;
    let lambdas = setup.lambdas();
    let mut rng = setup.rng(index);
    let mut rho = RunningTrapezoid::default();
    st.run_coupled(u0.coeffs(), v0.coeffs(), &mut rng, |n, _, (a, _), (b, _)| {
        rho.add(h1_sq(b, &lambdas));
        sink(n, (-coef * rho.value(dt)).exp() * diff_sq(a, b));
    })?;
    Ok(())
}

/// Weighted contraction of two solutions driven by the same noise:
/// `E[e^{−ρ(t)}‖w(t)‖²] ≤ ‖w₀‖² e^{[2β(1+γ+γ²)+L]t}`.
pub fn verify_uniqueness_contraction(
    setup: &Setup,
    cfg: &UniquenessConfig,
) -> Result<ExperimentReport, EstimatesError> {
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    let steps = checkpoint_steps(setup.solver.n_steps(), cfg.checkpoints);
    let template = setup.stepper()?;
    let paths: Vec<Result<Vec<f64>, BlowUp>> = par_map(
        cfg.ensemble,
        || template.clone(),
        |st, i| {
            let mut vals = vec![0.0; steps.len()];
            run_weighted(setup, st, &cfg.u0, &cfg.v0, i, |n, x| {
                if let Ok(j) = steps.binary_search(&n) {
                    vals[j] = x;
                }
            })?;
            Ok(vals)
        },
    );
    let ok: Vec<&Vec<f64>> = paths.iter().filter_map(|r| r.as_ref().ok()).collect();

    let mut report = ExperimentReport::new(
        "uniqueness",
        "weighted contraction of two solutions driven by the same noise",
        setup.snapshot(cfg),
        cfg.ensemble,
    );
    let l = setup.lipschitz_constant();
    let rate = 2.0 * setup.params.monotonicity_reaction() + l;
    let w0 = cfg.u0.resized(setup.solver.n_modes).sub(&cfg.v0.resized(setup.solver.n_modes)).l2_sq();
    report.parameter("Lipschitz constant L", l);
    report.parameter("initial difference squared", w0);
    if ok.len() < paths.len() {
        report.inconclusive(blowup_note(paths.len() - ok.len(), paths.len()));
    }
    if ok.is_empty() {
        return Ok(report);
    }
    for (j, &n) in steps.iter().enumerate() {
        let t = setup.solver.time(n);
        let xs: Vec<f64> = ok.iter().map(|v| v[j]).collect();
        let m = mean_se(&xs);
        let bound = w0 * (rate * t).exp();
        report.empirical(format!("weighted difference at t={t}"), m.mean, m.se);
        report.bound(format!("contraction bound at t={t}"), bound);
        report.compare(Comparison::at_most(format!("contraction at t={t}"), m.mean, m.se, bound));
    }
    Ok(report)
}
