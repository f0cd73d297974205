use bhlab_solver::Stepper;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::report::{Comparison, ExperimentReport, Provenance, Relation};
use crate::setup::{blowup_note, l2_sq};
use crate::stats::{linear_fit, proportion};
use crate::{par_map, precondition, EstimatesError, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitTailConfig {
    /// Exit radii, increasing.
    pub radii: Vec<f64>,
    pub u0: SpectralField,
    pub ensemble: usize,
    /// Also run each path at `dt/2` on the same Brownian path and compare.
    #[serde(default = "yes")]
    pub dt_halving: bool,
}

fn yes() -> bool {
    true
}

fn too_big(a: &[f64], threshold: f64) -> bool {
    let r = l2_sq(a).sqrt();
    !r.is_finite() || r > threshold
}

/// Discrete sup of `‖u‖_{L²}` on the coarse grid and, when `fine` is given,
/// on the grid with half the step driven by the same Brownian path.
fn sup_pair(
    setup: &Setup,
    coarse: &mut Stepper,
    fine: Option<&mut Stepper>,
    u0: &SpectralField,
    index: usize,
) -> Option<(f64, f64)> {
    let n = setup.solver.n_modes;
    let threshold = setup.solver.blowup_threshold;
    let mut rng = setup.rng(index);
    let mut a = u0.resized(n).into_coeffs();
    let mut sup_c = l2_sq(&a);
    match fine {
        None => {
            coarse.run(&a, &mut rng, |_, _, x, _| sup_c = sup_c.max(l2_sq(x))).ok()?;
            Some((sup_c.sqrt(), f64::NAN))
        }
        Some(fine) => {
            let mut b = a.clone();
            let mut sup_f = sup_c;
            let mut dw = vec![0.0; n];
            let mut dw2 = vec![0.0; n];
            for _ in 0..setup.solver.n_steps() {
                dw.copy_from_slice(fine.draw_increment(&mut rng));
                fine.advance_with(&mut b, &dw);
                sup_f = sup_f.max(l2_sq(&b));
                dw2.copy_from_slice(fine.draw_increment(&mut rng));
                fine.advance_with(&mut b, &dw2);
                dw.iter_mut().zip(&dw2).for_each(|(x, y)| *x += y);
                sup_f = sup_f.max(l2_sq(&b));
                coarse.advance_with(&mut a, &dw);
                sup_c = sup_c.max(l2_sq(&a));
                if too_big(&a, threshold) || too_big(&b, threshold) {
                    return None;
                }
            }
            Some((sup_c.sqrt(), sup_f.sqrt()))
        }
    }
}

/// `exp(‖u₀‖² + Tr Q·T)·exp(−R² e^{−MT}/M)` with `M = β(1+γ²) + 2 Tr Q`.
pub(crate) fn exit_bound(u0_sq: f64, trace: f64, m: f64, t: f64, r: f64) -> f64 {
    (u0_sq + trace * t - r * r * (-m * t).exp() / m).exp()
}

/// Tail of the running maximum of `‖u‖_{L²}` under additive noise.
pub fn exit_time_tail(setup: &Setup, cfg: &ExitTailConfig) -> Result<ExperimentReport, EstimatesError> {
    let trace = setup.additive_trace()?;
    if cfg.radii.is_empty() || cfg.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return precondition("exit radii must be positive");
    }
    if cfg.radii.windows(2).any(|w| w[1] <= w[0]) {
        return precondition("exit radii must be strictly increasing");
    }
    if cfg.ensemble == 0 {
        return precondition("ensemble must be positive");
    }
    let t_end = setup.solver.t_end;
    let m = setup.params.reaction_growth() + 2.0 * trace;
    let u0_sq = cfg.u0.resized(setup.solver.n_modes).l2_sq();

    let coarse = setup.stepper()?;
    let fine = if cfg.dt_halving {
        let half = setup.solver.with_dt(setup.solver.dt / 2.0)?;
        Some(setup.with_solver(half).stepper()?)
    } else {
        None
    };
    let sups: Vec<Option<(f64, f64)>> = par_map(
        cfg.ensemble,
        || (coarse.clone(), fine.clone()),
        |(c, f), i| sup_pair(setup, c, f.as_mut(), &cfg.u0, i),
    );
    let ok: Vec<(f64, f64)> = sups.iter().flatten().copied().collect();

    let mut report = ExperimentReport::new(
        "exit-tail",
        "Gaussian-type tail of the running maximum of the L2 norm",
        setup.snapshot(cfg),
        cfg.ensemble,
    );
    report.parameter("trace of Q", trace);
    report.parameter("exponent constant M", m);
    report.parameter("time step", setup.solver.dt);
    if ok.len() < sups.len() {
        report.inconclusive(blowup_note(sups.len() - ok.len(), sups.len()));
    }
    if ok.is_empty() {
        return Ok(report);
    }
    let n = ok.len();
    let mut fit_pts = Vec::new();
    for &r in &cfg.radii {
        let hits = ok.iter().filter(|s| s.0 > r).count();
        let p = proportion(hits, n);
        let bound = exit_bound(u0_sq, trace, m, t_end, r);
        report.empirical(format!("exceedance probability at R={r}"), p.mean, p.se);
        report.bound(format!("tail bound at R={r}"), bound);
        report.compare(Comparison::at_most(format!("tail bound at R={r}"), p.mean, p.se, bound));
        if hits == 0 {
            report.quantity(format!("censored upper limit at R={r}"), 3.0 / n as f64, Provenance::Derived, None);
        } else {
            fit_pts.push((r * r, -p.mean.ln()));
        }
        if cfg.dt_halving {
            let pf = proportion(ok.iter().filter(|s| s.1 > r).count(), n);
            let joint = (p.se * p.se + pf.se * pf.se).sqrt();
            report.empirical(format!("exceedance probability at R={r} with dt/2"), pf.mean, pf.se);
            report.compare(Comparison::new(
                format!("dt halving shift at R={r}"),
                (pf.mean - p.mean).abs(),
                joint,
                Relation::AtMost,
                0.0,
                2.0,
            ));
        }
    }
    if fit_pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit_pts.into_iter().unzip();
        let fit = linear_fit(&x, &y);
        report.quantity("fitted intercept a", fit.intercept, Provenance::Fitted, None);
        report.quantity("fitted quadratic coefficient b", fit.slope, Provenance::Fitted, Some(fit.slope_se));
        report.compare(Comparison::new("quadratic coefficient positive", fit.slope, fit.slope_se, Relation::AtLeast, 0.0, 0.0));
    } else {
        report.inconclusive("fewer than two uncensored radii for the quadratic fit");
    }
    Ok(report)
}
