use bhlab_solver::Stepper;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport, Provenance, Relation};
use crate::setup::{blowup_note, diff_sq, h1_sq, l2_sq};
use crate::stats::{linear_fit, mean_se, RunningTrapezoid};
use crate::{par_map, precondition, EstimatesError, Setup};

/// Which coefficient is sent to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    /// Burgers–Huxley → stochastic Burgers.
    BetaToZero,
    /// Burgers–Huxley → stochastic Huxley.
    AlphaToZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InviscidConfig {
    pub limit: Limit,
    /// Positive, strictly decreasing.
    pub values: Vec<f64>,
    pub u0: SpectralField,
    pub ensemble: usize,
}

/// Per-path functionals of one coupled run of the full and limit equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPath {
    /// `e^{−ρ(T)}‖u(T) − v(T)‖²`.
    pub weighted_error: f64,
    pub int_l4: f64,
    pub int_l2: f64,
    pub int_h1: f64,
    pub sup_l2_pow4: f64,
}

fn limit_setups(setup: &Setup, limit: Limit, value: f64) -> Result<(Setup, Setup), EstimatesError> {
    let p = setup.params;
    let (full, lim) = match limit {
        Limit::BetaToZero => (p.with_beta(value)?, p.with_beta(0.0)?),
        Limit::AlphaToZero => (p.with_alpha(value)?, p.with_alpha(0.0)?),
    };
    Ok((setup.with_params(full), setup.with_params(lim)))
}

/// Runs the full equation (coefficient = `value`) and its limit on stream `index`.
///
/// The weight is `ρ = (Cα²/ν)∫‖u‖²_{H¹}` for the β-limit and
/// `ρ̂ = Cα∫‖u‖²_{H¹}` for the α-limit, `u` being the full solution.
pub fn coupled_limit_path(
    setup: &Setup,
    limit: Limit,
    value: f64,
    u0: &SpectralField,
    index: usize,
) -> Result<Option<LimitPath>, EstimatesError> {
    let (full, lim) = limit_setups(setup, limit, value)?;
    let mut a = full.stepper()?;
    let mut b = lim.stepper()?;
    Ok(run_pair(setup, &full, limit, &mut a, &mut b, u0, index))
}

fn run_pair(
    base: &Setup,
    full: &Setup,
    limit: Limit,
    sa: &mut Stepper,
    sb: &mut Stepper,
    u0: &SpectralField,
    index: usize,
) -> Option<LimitPath> {
    let p = &full.params;
    let c = base.embedding_constant;
    let weight = match limit {
        Limit::BetaToZero => c * p.alpha * p.alpha / p.nu,
        Limit::AlphaToZero => c * p.alpha,
    };
    let dt = base.solver.dt;
    let n = base.solver.n_modes;
    let lambdas = base.lambdas();
    let threshold = base.solver.blowup_threshold;
    let mut rng = base.rng(index);
    let mut u = u0.resized(n).into_coeffs();
    let mut v = u.clone();
    let (mut h1, mut l4, mut l2) =
        (RunningTrapezoid::default(), RunningTrapezoid::default(), RunningTrapezoid::default());
    let mut sup = 0.0f64;
    let mut dw = vec![0.0; n];
    for _ in 0..base.solver.n_steps() {
        let e = l2_sq(&u);
        sup = sup.max(e);
        l2.add(e);
        h1.add(h1_sq(&u, &lambdas));
        dw.copy_from_slice(sa.draw_increment(&mut rng));
        l4.add(sa.advance_with(&mut u, &dw));
        sb.advance_with(&mut v, &dw);
        let bad = |x: &[f64]| {
            let r = l2_sq(x).sqrt();
            !r.is_finite() || r > threshold
        };
        if bad(&u) || bad(&v) {
            return None;
        }
    }
    let e = l2_sq(&u);
    sup = sup.max(e);
    l2.add(e);
    h1.add(h1_sq(&u, &lambdas));
    l4.add(sa.l4_pow4(&u));
    let rho = weight * h1.value(dt);
    Some(LimitPath {
        weighted_error: (-rho).exp() * diff_sq(&u, &v),
        int_l4: l4.value(dt),
        int_l2: l2.value(dt),
        int_h1: h1.value(dt),
        sup_l2_pow4: sup * sup,
    })
}

/// Couples the full equation with its β→0 (Burgers) or α→0 (Huxley) limit on
/// shared noise for each value of the vanishing coefficient.
pub fn inviscid_limit_sweep(setup: &Setup, cfg: &InviscidConfig) -> Result<ExperimentReport, EstimatesError> {
    if cfg.values.is_empty() || cfg.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return precondition("sweep values must be positive");
    }
    if cfg.values.windows(2).any(|w| w[1] >= w[0]) {
        return precondition("sweep values must be strictly decreasing");
    }
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    if cfg.limit == Limit::BetaToZero && !setup.noise.is_additive() {
        return precondition("the beta -> 0 estimate has no noise-difference term; use additive noise");
    }
    let (name, reference) = match cfg.limit {
        Limit::BetaToZero => ("inviscid-beta", "convergence to the stochastic Burgers equation as beta vanishes"),
        Limit::AlphaToZero => ("inviscid-alpha", "convergence to the stochastic Huxley equation as alpha vanishes"),
    };
    let mut report =
        ExperimentReport::new(name, reference, setup.snapshot(cfg), cfg.ensemble * cfg.values.len());
    let t_end = setup.solver.t_end;
    let c = setup.embedding_constant;
    let l = setup.lipschitz_constant();
    let mut rms = Vec::new();
    let mut failed = 0;

    for &value in &cfg.values {
        let (full, lim) = limit_setups(setup, cfg.limit, value)?;
        let (ta, tb) = (full.stepper()?, lim.stepper()?);
        let paths: Vec<Option<LimitPath>> = par_map(
            cfg.ensemble,
            || (ta.clone(), tb.clone()),
            |(sa, sb), i| run_pair(setup, &full, cfg.limit, sa, sb, &cfg.u0, i),
        );
        let ok: Vec<LimitPath> = paths.iter().flatten().copied().collect();
        failed += paths.len() - ok.len();
        if ok.is_empty() {
            continue;
        }
        let col = |f: fn(&LimitPath) -> f64| mean_se(&ok.iter().map(f).collect::<Vec<_>>());
        let ms = col(|x| x.weighted_error);
        let p = &full.params;
        let bound = match cfg.limit {
            Limit::BetaToZero => {
                let g = p.gamma;
                let l4 = col(|x| x.int_l4).mean;
                let l2 = col(|x| x.int_l2).mean;
                let sup4 = col(|x| x.sup_l2_pow4).mean;
                let l4sq = col(|x| x.int_l4 * x.int_l4).mean;
                value
                    * (2.0 * (1.0 + g).powi(2) * l4
                        + 0.5 * g * g * l2
                        + c * value / (2.0 * p.nu) * sup4.sqrt() * l4sq.sqrt())
                    * (value * t_end).exp()
            }
            Limit::AlphaToZero => {
                let h1 = col(|x| x.int_h1).mean;
                c * value * h1 * ((2.0 * p.monotonicity_reaction() + l) * t_end).exp()
            }
        };
        let root = ms.mean.sqrt();
        let root_se = if root > 0.0 { ms.se / (2.0 * root) } else { 0.0 };
        report.parameter(format!("value {value}"), value);
        report.empirical(format!("weighted mean-square error at {value}"), ms.mean, ms.se);
        report.empirical(format!("weighted rms error at {value}"), root, root_se);
        report.bound(format!("error bound at {value}"), bound);
        report.compare(Comparison::at_most(format!("error bound at {value}"), ms.mean, ms.se, bound));
        rms.push((value, root, root_se));
    }
    if failed > 0 {
        report.inconclusive(blowup_note(failed, cfg.ensemble * cfg.values.len()));
    }
    for w in rms.windows(2) {
        let ((v0, r0, s0), (v1, r1, s1)) = (w[0], w[1]);
        let ratio = r0 / r1;
        let se = ratio * ((s0 / r0).powi(2) + (s1 / r1).powi(2)).sqrt();
        let label = format!("rms ratio {v0}/{v1}");
        report.quantity(label.clone(), ratio, Provenance::Derived, Some(se));
        report.compare(Comparison::new(format!("{label} lower"), ratio, se, Relation::AtLeast, 1.3, 0.0));
        report.compare(Comparison::new(format!("{label} upper"), ratio, se, Relation::AtMost, 3.0, 0.0));
    }
    let pts: Vec<(f64, f64)> = rms.iter().filter(|r| r.1 > 0.0).map(|r| (r.0.ln(), r.1.ln())).collect();
    if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = linear_fit(&x, &y);
        report.quantity("fitted order of the rms error", fit.slope, Provenance::Fitted, Some(fit.slope_se));
    }
    Ok(report)
}
