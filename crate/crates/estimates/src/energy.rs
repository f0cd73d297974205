use bhlab_solver::BlowUp;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport};
use crate::setup::{blowup_note, h1_sq, l2_sq};
use crate::stats::{mean_se, RunningTrapezoid};
use crate::{par_map, precondition, EstimatesError, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub u0: SpectralField,
    pub ensemble: usize,
    /// Moment order `p` of the higher energy estimate.
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    2
}

#[derive(Debug, Clone, Copy)]
struct EnergyPath {
    lhs1: f64,
    lhs2: f64,
    int_h1: f64,
    int_l4: f64,
}

/// `C(p,K,T) = (4(p−1))^{p−1}(14p−1)^p K^p`.
pub(crate) fn energy2_constant(p: u32, k: f64) -> f64 {
    let pf = p as f64;
    (4.0 * (pf - 1.0)).powf(pf - 1.0) * (14.0 * pf - 1.0).powf(pf) * k.powf(pf)
}

/// Energy estimates for the Galerkin system:
///
/// ```text
/// E[sup‖u‖² + 4ν∫‖u‖²_{H¹} + 2β∫‖u‖⁴_{L⁴}] ≤ (2‖u₀‖² + 14KT) e^{4(β(1+γ²)+7K)T}
/// ```
///
/// and its order-`2p` analogue with weights `‖u‖^{2(p−1)}`.
pub fn verify_energy_bounds(setup: &Setup, cfg: &EnergyConfig) -> Result<ExperimentReport, EstimatesError> {
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    if cfg.order < 1 {
        return precondition("moment order p must be at least 1");
    }
    let p = &setup.params;
    let dt = setup.solver.dt;
    let t_end = setup.solver.t_end;
    let lambdas = setup.lambdas();
    let pm = cfg.order as i32;
    let template = setup.stepper()?;

    let paths: Vec<Result<EnergyPath, BlowUp>> = par_map(
        cfg.ensemble,
        || template.clone(),
        |st, i| {
            let mut rng = setup.rng(i);
            let (mut sup, mut sup_p) = (0.0f64, 0.0f64);
            let mut h1 = RunningTrapezoid::default();
            let mut l4 = RunningTrapezoid::default();
            let mut wh1 = RunningTrapezoid::default();
            let mut wl4 = RunningTrapezoid::default();
            st.run(cfg.u0.coeffs(), &mut rng, |_, _, a, l4p| {
                let e = l2_sq(a);
                let g = h1_sq(a, &lambdas);
                let w = e.powi(pm - 1);
                sup = sup.max(e);
                sup_p = sup_p.max(e.powi(pm));
                h1.add(g);
                l4.add(l4p);
                wh1.add(w * g);
                wl4.add(w * l4p);
            })?;
            let pf = cfg.order as f64;
            Ok(EnergyPath {
                lhs1: sup + 4.0 * p.nu * h1.value(dt) + 2.0 * p.beta * l4.value(dt),
                lhs2: sup_p + 4.0 * pf * p.nu * wh1.value(dt) + 2.0 * pf * p.beta * wl4.value(dt),
                int_h1: h1.value(dt),
                int_l4: l4.value(dt),
            })
        },
    );
    let ok: Vec<EnergyPath> = paths.iter().filter_map(|r| r.as_ref().ok().copied()).collect();

    let mut report = ExperimentReport::new(
        "energy",
        "energy estimates for the Galerkin approximations",
        setup.snapshot(cfg),
        cfg.ensemble,
    );
    let k = setup.growth_constant();
    let u0 = cfg.u0.l2_sq();
    let g = p.reaction_growth();
    let pf = cfg.order as f64;
    let c = energy2_constant(cfg.order, k);
    let bound1 = (2.0 * u0 + 14.0 * k * t_end) * (4.0 * (g + 7.0 * k) * t_end).exp();
    // As printed: the exponent carries T twice.
    let two_p = 2f64.powf(pf);
    let bound2 = (2.0 * u0.powf(pf) + c * two_p * t_end) * ((2.0 * pf * g + c * two_p * t_end) * t_end).exp();
    report.parameter("growth constant K", k);
    report.parameter("moment order p", pf);
    report.bound("energy2 constant C(p,K,T)", c);

    if ok.len() < paths.len() {
        report.inconclusive(blowup_note(paths.len() - ok.len(), paths.len()));
    }
    if ok.is_empty() {
        return Ok(report);
    }
    let col = |f: fn(&EnergyPath) -> f64| ok.iter().map(f).collect::<Vec<_>>();
    let e1 = mean_se(&col(|e| e.lhs1));
    let e2 = mean_se(&col(|e| e.lhs2));
    let sq_h1 = mean_se(&col(|e| e.int_h1 * e.int_h1));
    let sq_l4 = mean_se(&col(|e| e.int_l4 * e.int_l4));
    report.empirical("energy1 left side", e1.mean, e1.se);
    report.bound("energy1 bound", bound1);
    report.empirical("energy2 left side", e2.mean, e2.se);
    report.bound("energy2 bound", bound2);
    report.empirical("second moment of time-integrated H1 norm squared", sq_h1.mean, sq_h1.se);
    report.empirical("second moment of time-integrated L4 norm to the fourth", sq_l4.mean, sq_l4.se);
    report.compare(Comparison::at_most("energy1", e1.mean, e1.se, bound1));
    report.compare(Comparison::at_most("energy2", e2.mean, e2.se, bound2));
    if !(sq_h1.mean.is_finite() && sq_l4.mean.is_finite()) {
        report.inconclusive("square-integral moments are not finite");
    }
    Ok(report)
}
