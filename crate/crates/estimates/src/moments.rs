use bhlab_solver::BlowUp;
use bhlab_spectral::{SpectralField, PI_SQ};
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport};
use crate::setup::{blowup_note, h1_sq, l2_sq};
use crate::stats::{mean_se, RunningTrapezoid};
use crate::{checkpoint_steps, par_map, precondition, EstimatesError, Setup};

/// Constants of the exponential-moment and stability estimates for one setup
/// with additive noise (`Q` below is the effective covariance `a₀²Q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentBudget {
    pub epsilon: f64,
    /// `(νπ² − β(1+γ²))/(2‖Q‖)`, infinite when `Q = 0`.
    pub epsilon_cap: f64,
    /// `(νπ² − β(1+γ²)/2) − Cα² Tr Q/ν²`.
    pub kappa_hat: f64,
    /// `κ̂` with `C = 0`.
    pub kappa_hat_c0: f64,
    /// `β(1+γ²) + 2 Tr Q`.
    pub m: f64,
    pub p: u32,
    pub trace_q: f64,
    pub op_norm_q: f64,
}

impl MomentBudget {
    /// Budget with `ε = fraction × cap` (or `ε = 0` when the cap is not positive).
    pub fn new(setup: &Setup, fraction: f64) -> Result<Self, EstimatesError> {
        let p = &setup.params;
        let trace_q = setup.additive_trace()?;
        let op_norm_q = setup.additive_op_norm()?;
        let g = p.reaction_growth();
        let gap = p.nu * PI_SQ - g;
        let epsilon_cap = if op_norm_q > 0.0 { gap / (2.0 * op_norm_q) } else { f64::INFINITY };
        let base = p.nu * PI_SQ - g / 2.0;
        let kappa_hat = base - setup.embedding_constant * p.alpha * p.alpha * trace_q / (p.nu * p.nu);
        let epsilon = if epsilon_cap.is_finite() && epsilon_cap > 0.0 { fraction * epsilon_cap } else { 0.0 };
        Ok(Self { epsilon, epsilon_cap, kappa_hat, kappa_hat_c0: base, m: g + 2.0 * trace_q, p: 2, trace_q, op_norm_q })
    }

    /// `ν > β(1+γ²)/π²` and `ν³π² − β(1+γ²)ν² ≥ 2Cα² Tr Q`.
    pub fn stability_condition(setup: &Setup) -> Result<bool, EstimatesError> {
        let p = &setup.params;
        let tr = setup.additive_trace()?;
        let g = p.reaction_growth();
        let lhs = p.nu.powi(3) * PI_SQ - g * p.nu * p.nu;
        Ok(p.is_dissipative() && lhs >= 2.0 * setup.embedding_constant * p.alpha * p.alpha * tr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    /// Defaults to the admissible cap.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub u0: SpectralField,
    pub ensemble: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

fn default_checkpoints() -> usize {
    5
}

/// `E exp(εΘ(t)) ≤ exp(ε‖u₀‖² + εt Tr Q)` with
/// `Θ(t) = ‖u(t)‖² + ν∫₀ᵗ‖u‖²_{H¹} + β∫₀ᵗ‖u‖⁴_{L⁴}`.
pub fn exponential_moment_check(setup: &Setup, cfg: &MomentConfig) -> Result<ExperimentReport, EstimatesError> {
    let p = setup.params;
    if !p.is_dissipative() {
        return precondition(format!(
            "need nu > beta(1+gamma^2)/pi^2: {} <= {}",
            p.nu,
            p.reaction_growth() / PI_SQ
        ));
    }
    let budget = MomentBudget::new(setup, 1.0)?;
    let eps = cfg.epsilon.unwrap_or(budget.epsilon);
    if !(eps > 0.0 && eps.is_finite()) {
        return precondition(format!("epsilon must be positive and finite, got {eps}"));
    }
    if eps > budget.epsilon_cap * (1.0 + 1e-12) {
        return precondition(format!(
            "epsilon {eps} exceeds (nu pi^2 - beta(1+gamma^2))/(2|Q|) = {}",
            budget.epsilon_cap
        ));
    }
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    let budget = MomentBudget { epsilon: eps, ..budget };
    let dt = setup.solver.dt;
    let lambdas = setup.lambdas();
    let steps = checkpoint_steps(setup.solver.n_steps(), cfg.checkpoints);
    let template = setup.stepper()?;
    let paths: Vec<Result<Vec<f64>, BlowUp>> = par_map(
        cfg.ensemble,
        || template.clone(),
        |st, i| {
            let mut rng = setup.rng(i);
            let mut h1 = RunningTrapezoid::default();
            let mut l4 = RunningTrapezoid::default();
            let mut vals = vec![0.0; steps.len()];
            st.run(cfg.u0.coeffs(), &mut rng, |n, _, a, l4p| {
                h1.add(h1_sq(a, &lambdas));
                l4.add(l4p);
                if let Ok(j) = steps.binary_search(&n) {
                    let theta = l2_sq(a) + p.nu * h1.value(dt) + p.beta * l4.value(dt);
                    vals[j] = (eps * theta).exp();
                }
            })?;
            Ok(vals)
        },
    );
    let ok: Vec<&Vec<f64>> = paths.iter().filter_map(|r| r.as_ref().ok()).collect();

    let mut report = ExperimentReport::new(
        "moments",
        "exponential moment of the energy functional under additive noise",
        setup.snapshot(&(cfg, budget)),
        cfg.ensemble,
    );
    report.parameter("epsilon", eps);
    report.parameter("epsilon cap", budget.epsilon_cap);
    report.parameter("trace of Q", budget.trace_q);
    if ok.len() < paths.len() {
        report.inconclusive(blowup_note(paths.len() - ok.len(), paths.len()));
    }
    if ok.is_empty() {
        return Ok(report);
    }
    let u0 = cfg.u0.resized(setup.solver.n_modes).l2_sq();
    for (j, &n) in steps.iter().enumerate() {
        let t = setup.solver.time(n);
        let m = mean_se(&ok.iter().map(|v| v[j]).collect::<Vec<_>>());
        let bound = (eps * u0 + eps * t * budget.trace_q).exp();
        report.empirical(format!("exponential moment at t={t}"), m.mean, m.se);
        report.bound(format!("exponential moment bound at t={t}"), bound);
        report.compare(Comparison::at_most(format!("exponential moment at t={t}"), m.mean, m.se, bound));
    }
    Ok(report)
}
