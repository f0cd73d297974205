use bhlab_estimates::stats::proportion;
use bhlab_estimates::{par_map, Comparison, ExperimentReport, Provenance, Relation, Setup};
use bhlab_noise::NoiseCoefficient;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::{linear_exit_cost, minimize_rate_to_exit, LdpError, MinimizeConfig, MinimizerBudget, MinimizerStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    /// Noise intensities, strictly decreasing.
    pub eps_values: Vec<f64>,
    pub radius: f64,
    pub u0: SpectralField,
    pub ensemble: usize,
    #[serde(default)]
    pub budget: MinimizerBudget,
    /// Skips the optimiser when given.
    #[serde(default)]
    pub j_hat: Option<f64>,
}

/// `L(ε) = −ε log P{sup_t ‖u^ε(t)‖ > R}` for `du^ε = … + √ε a₀ dW`, compared
/// with the exit cost `J_hat` found by the optimiser.
pub fn small_noise_scaling(setup: &Setup, cfg: &ScalingConfig) -> Result<ExperimentReport, LdpError> {
    let amplitude = match setup.noise {
        NoiseCoefficient::Additive { amplitude } if amplitude > 0.0 => amplitude,
        _ => return Err(LdpError::Precondition("small-noise scaling needs additive noise".into())),
    };
    if cfg.eps_values.is_empty() || cfg.eps_values.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(LdpError::Precondition("noise intensities must be positive".into()));
    }
    if cfg.eps_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LdpError::Precondition("noise intensities must be strictly decreasing".into()));
    }
    if cfg.ensemble == 0 {
        return Err(LdpError::Precondition("ensemble must be positive".into()));
    }
    let q = setup.additive_covariance()?;
    let mut report = ExperimentReport::new(
        "ldp-scaling",
        "small-noise exit probabilities against the rate function",
        setup.snapshot(cfg),
        cfg.ensemble * cfg.eps_values.len(),
    );

    let j_hat = match cfg.j_hat {
        Some(j) => j,
        None => {
            let m = MinimizeConfig { radius: cfg.radius, u0: cfg.u0.clone(), budget: cfg.budget };
            let out = minimize_rate_to_exit(&m, &setup.params, &q, &setup.solver)?;
            report.quantity("optimizer evaluations", out.evaluations as f64, Provenance::Derived, None);
            if out.status == MinimizerStatus::InfeasibleWithinBudget {
                report.inconclusive("no exit control found within the optimizer budget");
            }
            if !out.certificate_verified {
                report.inconclusive("the optimizer's exit certificate did not re-verify");
            }
            out.j_hat
        }
    };
    report.quantity("J_hat (upper bound on the exit cost)", j_hat, Provenance::Derived, None);
    let p = &setup.params;
    if p.alpha == 0.0 && p.beta == 0.0 && cfg.u0.l2_sq() == 0.0 {
        let j = linear_exit_cost(cfg.radius, q.mus()[0], p.nu, 1, setup.solver.t_end);
        report.quantity("Gramian exit cost of mode 1", j, Provenance::AnalyticBound, None);
    }

    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    let mut censored_last = false;
    for &eps in &cfg.eps_values {
        let s = setup.with_noise(NoiseCoefficient::additive(amplitude * eps.sqrt())?);
        let mut template = s.stepper()?;
        template.set_track_l4(false);
        let sups: Vec<Option<f64>> = par_map(
            cfg.ensemble,
            || template.clone(),
            |st, i| {
                let mut rng = s.rng(i);
                let mut sup = 0.0f64;
                st.run(cfg.u0.coeffs(), &mut rng, |_, _, a, _| sup = sup.max(a.iter().map(|x| x * x).sum::<f64>()))
                    .ok()?;
                Some(sup.sqrt())
            },
        );
        let ok: Vec<f64> = sups.iter().flatten().copied().collect();
        if ok.len() < sups.len() {
            report.inconclusive(format!("{} paths blew up at eps = {eps}", sups.len() - ok.len()));
        }
        let hits = ok.iter().filter(|s| **s > cfg.radius).count();
        let pr = proportion(hits, ok.len().max(1));
        report.empirical(format!("exceedance probability at eps={eps}"), pr.mean, pr.se);
        if hits == 0 {
            let lower = -eps * (3.0 / ok.len().max(1) as f64).ln();
            report.quantity(format!("censored lower limit of L at eps={eps}"), lower, Provenance::Derived, None);
            censored_last = true;
            continue;
        }
        censored_last = false;
        let l = -eps * pr.mean.ln();
        let se = eps * pr.se / pr.mean;
        report.empirical(format!("L at eps={eps}"), l, se);
        points.push((eps, l, se));
    }
    for w in points.windows(2) {
        let ((e0, l0, s0), (e1, l1, s1)) = (w[0], w[1]);
        report.compare(Comparison::new(
            format!("L nondecreasing from eps={e0} to eps={e1}"),
            l1 - l0,
            (s0 * s0 + s1 * s1).sqrt(),
            Relation::AtLeast,
            0.0,
            2.0,
        ));
    }
    match points.last() {
        Some(&(eps, l, se)) if !censored_last => {
            report.compare(Comparison::new(
                format!("L at eps={eps} within 25% of J_hat"),
                l,
                se,
                Relation::AtMost,
                1.25 * j_hat,
                0.0,
            ));
        }
        _ => report.inconclusive("no exceedances at the smallest noise intensity"),
    }
    Ok(report)
}
