use bhlab_noise::CovarianceSpec;
use bhlab_solver::SolverConfig;
use bhlab_spectral::{lambda, ModelParams, SpectralField};
use serde::{Deserialize, Serialize};

use crate::{theta_of_control, ControlPath, ImageEvaluator, LdpError, RateEvaluation};

/// Search space and effort of the exit-cost optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizerBudget {
    /// Piecewise-constant intervals, at most 16.
    pub intervals: usize,
    /// Controlled low modes, at most 8.
    pub modes: usize,
    /// Objective evaluations (each one a scale root-find).
    pub max_evaluations: usize,
    /// Coordinates whose step falls below this are frozen.
    pub step_tolerance: f64,
}

impl Default for MinimizerBudget {
    fn default() -> Self {
        Self { intervals: 16, modes: 8, max_evaluations: 4000, step_tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeConfig {
    pub radius: f64,
    pub u0: SpectralField,
    pub budget: MinimizerBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimizerStatus {
    /// The uncontrolled flow already leaves the ball; `J = 0`.
    Trivial,
    Feasible,
    /// No control within the budget reached the sphere. This is not a claim that `J = ∞`.
    InfeasibleWithinBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerOutcome {
    pub best: Option<RateEvaluation>,
    /// Cost of the best control found; an upper bound on the exit cost.
    pub j_hat: f64,
    pub is_upper_bound: bool,
    pub status: MinimizerStatus,
    /// The best control, re-simulated through the skeleton solver, reaches `R`.
    pub certificate_verified: bool,
    pub evaluations: usize,
    pub deterministic_sup: f64,
}

struct Problem<'a> {
    radius: f64,
    u0: &'a [f64],
    /// `dt_j/μ_k` per entry of the control matrix.
    weights: Vec<f64>,
}

impl Problem<'_> {
    fn cost(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum::<f64>()
    }

    /// Smallest feasible scale `s` with `sup ‖Θ(s·x)‖ ≥ R`, and the cost `s²·cost(x)`.
    fn objective(&self, ev: &mut ImageEvaluator, x: &[f64], guess: f64) -> Option<(f64, f64)> {
        let c = self.cost(x);
        if !(c > 0.0) {
            return None;
        }
        let target = self.radius * (1.0 + 1e-12);
        let mut buf = vec![0.0; x.len()];
        let mut g = |s: f64| {
            buf.iter_mut().zip(x).for_each(|(b, x)| *b = s * x);
            ev.sup_norm(&buf, self.u0) - target
        };
        let (mut lo, mut glo) = (0.0, g(0.0));
        if glo >= 0.0 {
            return Some((0.0, 0.0));
        }
        let mut hi = if guess > 0.0 && guess.is_finite() { guess } else { 1.0 };
        let mut ghi = g(hi);
        let mut tries = 0;
        while ghi < 0.0 {
            lo = hi;
            glo = ghi;
            hi *= 2.0;
            ghi = g(hi);
            tries += 1;
            if tries > 80 {
                return None;
            }
        }
        while lo == 0.0 && tries < 80 {
            let half = 0.5 * hi;
            let gh = g(half);
            if gh >= 0.0 {
                hi = half;
                ghi = gh;
            } else {
                lo = half;
                glo = gh;
            }
            tries += 1;
        }
        // Illinois variant of regula falsi; keeps the feasible end `hi`.
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mut s = hi - ghi * (hi - lo) / (ghi - glo);
            if !(s > lo && s < hi) {
                s = 0.5 * (lo + hi);
            }
            let gs = g(s);
            if gs >= 0.0 {
                hi = s;
                ghi = gs;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            } else {
                lo = s;
                glo = gs;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            }
        }
        Some((hi * hi * c, hi))
    }
}

fn grid_breakpoints(cfg: &SolverConfig, intervals: usize) -> Vec<f64> {
    let steps = cfg.n_steps();
    (0..=intervals).map(|j| cfg.time(((j * steps) as f64 / intervals as f64).round() as usize)).collect()
}

fn control_from(x: &[f64], scale: f64, breakpoints: Vec<f64>, modes: usize) -> Result<ControlPath, LdpError> {
    let values = x.chunks(modes).map(|row| SpectralField::new(row.iter().map(|v| scale * v).collect())).collect::<Result<Vec<_>, _>>()?;
    ControlPath::new(breakpoints, values)
}

/// Minimises the control cost over piecewise-constant controls whose image
/// leaves the closed `L²` ball of radius `R` before `T = cfg.t_end`.
///
/// Derivative-free coordinate search with per-coordinate step adaptation; for
/// each direction the exit scale is found by a bracketed root search. The two
/// candidates of each coordinate are evaluated in parallel, acceptance is
/// sequential, so the best value never increases and a larger budget extends
/// the same search.
pub fn minimize_rate_to_exit(
    cfg_min: &MinimizeConfig,
    p: &ModelParams,
    spec: &CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<MinimizerOutcome, LdpError> {
    let b = cfg_min.budget;
    if !(cfg_min.radius > 0.0 && cfg_min.radius.is_finite()) {
        return Err(LdpError::Precondition("radius must be positive".into()));
    }
    if b.intervals == 0 || b.intervals > 16 || b.modes == 0 || b.modes > 8 {
        return Err(LdpError::Precondition("budget allows 1..=16 intervals and 1..=8 modes".into()));
    }
    if b.intervals > cfg.n_steps() {
        return Err(LdpError::Precondition("more control intervals than time steps".into()));
    }
    let modes = b.modes.min(cfg.n_modes).min(spec.n_modes());
    let breakpoints = grid_breakpoints(cfg, b.intervals);
    let u0 = cfg_min.u0.resized(cfg.n_modes).into_coeffs();
    let mut ev = ImageEvaluator::new(cfg, p, &breakpoints, modes)?;
    let weights = (0..b.intervals)
        .flat_map(|j| {
            let dt = breakpoints[j + 1] - breakpoints[j];
            spec.mus()[..modes].iter().map(move |mu| dt / mu)
        })
        .collect();
    let prob = Problem { radius: cfg_min.radius, u0: &u0, weights };
    let dim = b.intervals * modes;

    let deterministic_sup = ev.sup_norm(&vec![0.0; dim], &u0);
    if deterministic_sup >= cfg_min.radius {
        let zero = ControlPath::new(breakpoints, vec![SpectralField::zeros(modes); b.intervals])?;
        let best = theta_of_control(&zero, &cfg_min.u0, p, spec, cfg)?;
        let verified = best.image_sup() >= cfg_min.radius;
        return Ok(MinimizerOutcome {
            j_hat: best.cost,
            best: Some(best),
            is_upper_bound: true,
            status: MinimizerStatus::Trivial,
            certificate_verified: verified,
            evaluations: 0,
            deterministic_sup,
        });
    }

    // Start from the minimum-energy control of the linearised first mode,
    // `h(t) ∝ e^{−νλ₁(T−t)}`, averaged over each interval.
    let rate = p.nu * lambda(1);
    let t_end = cfg.t_end;
    let mut x = vec![0.0; dim];
    for j in 0..b.intervals {
        let (t0, t1) = (breakpoints[j], breakpoints[j + 1]);
        x[j * modes] = ((-rate * (t_end - t1)).exp() - (-rate * (t_end - t0)).exp()) / (rate * (t1 - t0));
    }
    let mut evals = 1;
    let Some((mut best, mut scale)) = prob.objective(&mut ev, &x, 1.0) else {
        return Ok(MinimizerOutcome {
            best: None,
            j_hat: f64::INFINITY,
            is_upper_bound: true,
            status: MinimizerStatus::InfeasibleWithinBudget,
            certificate_verified: false,
            evaluations: evals,
            deterministic_sup,
        });
    };
    let mut ev2 = ev.clone();
    let mut sigma = vec![0.5; dim];
    'search: loop {
        let mut active = false;
        for i in 0..dim {
            if sigma[i] < b.step_tolerance {
                continue;
            }
            active = true;
            if evals + 2 > b.max_evaluations {
                break 'search;
            }
            let mut plus = x.clone();
            plus[i] += sigma[i];
            let mut minus = x.clone();
            minus[i] -= sigma[i];
            let (rp, rm) = rayon::join(
                || prob.objective(&mut ev, &plus, scale),
                || prob.objective(&mut ev2, &minus, scale),
            );
            evals += 2;
            let mut accepted = false;
            for (cand, r) in [(plus, rp), (minus, rm)] {
                if let Some((f, s)) = r {
                    if f < best * (1.0 - 1e-12) {
                        best = f;
                        scale = s;
                        x = cand;
                        accepted = true;
                    }
                }
            }
            sigma[i] = if accepted { (2.0 * sigma[i]).min(1.0) } else { 0.5 * sigma[i] };
        }
        if !active {
            break;
        }
        let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 {
            x.iter_mut().for_each(|v| *v /= m);
            scale *= m;
        }
    }

    let control = control_from(&x, scale, breakpoints, modes)?;
    let eval = theta_of_control(&control, &cfg_min.u0, p, spec, cfg)?;
    let verified = eval.image_sup() >= cfg_min.radius;
    Ok(MinimizerOutcome {
        j_hat: eval.cost,
        best: Some(eval),
        is_upper_bound: true,
        status: MinimizerStatus::Feasible,
        certificate_verified: verified,
        evaluations: evals,
        deterministic_sup,
    })
}
