use bhlab_noise::CovarianceSpec;
use bhlab_operators::{Operators, Workspace};
use bhlab_solver::{skeleton_solve, Scheme, SkeletonMode, SolverConfig, Trajectory};
use bhlab_spectral::{lambda, ModelParams, SpectralField};

use crate::{rate_cost, ControlPath, LdpError};

/// A control, its heat skeleton `z`, the image `Θ(z) = z + Ψ(z)` and the cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEvaluation {
    pub control: ControlPath,
    pub skeleton: Trajectory,
    pub image: Trajectory,
    pub cost: f64,
}

impl RateEvaluation {
    /// `max_n ‖Θ(z)(t_n)‖_{L²}`.
    pub fn image_sup(&self) -> f64 {
        self.image.sup_l2()
    }
}

/// `z` solves `dz/dt + νAz = h`, `z(0) = 0`; `v = Ψ(z)` solves
/// `dv/dt + νAv = −αB(v+z) + βc(v+z)`, `v(0) = u₀`; the image is `z + v`.
pub fn theta_of_control(
    h: &ControlPath,
    u0: &SpectralField,
    p: &ModelParams,
    spec: &CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<RateEvaluation, LdpError> {
    let cost = rate_cost(h, spec)?;
    let forcing = h.forcing(cfg);
    let z = skeleton_solve(SkeletonMode::Heat { forcing: &forcing }, cfg, p)?;
    let v = skeleton_solve(SkeletonMode::PsiMap { u0, psi: &z.states }, cfg, p)?;
    let states = z.states.iter().zip(&v.states).map(|(a, b)| a.add(b)).collect();
    let image = Trajectory::from_states(z.times.clone(), states)?;
    Ok(RateEvaluation { control: h.clone(), skeleton: z, image, cost })
}

/// Computes only `sup_n ‖Θ(z)(t_n)‖` for piecewise-constant controls given as
/// an `intervals × modes` matrix; used inside the optimiser. The arithmetic
/// follows [`skeleton_solve`] step for step.
#[derive(Debug, Clone)]
pub struct ImageEvaluator {
    cfg: SolverConfig,
    params: ModelParams,
    ops: Operators,
    ws: Workspace,
    implicit: Vec<f64>,
    interval_of_step: Vec<usize>,
    modes: usize,
    z: Vec<f64>,
    v: Vec<f64>,
    shifted: Vec<f64>,
    drift: Vec<f64>,
}

impl ImageEvaluator {
    /// `breakpoints` are the control's; `modes` is the number of controlled modes.
    pub fn new(cfg: &SolverConfig, p: &ModelParams, breakpoints: &[f64], modes: usize) -> Result<Self, LdpError> {
        cfg.validate()?;
        let n = cfg.n_modes;
        if modes == 0 || modes > n {
            return Err(LdpError::Precondition(format!("controlled modes must lie in 1..={n}")));
        }
        let ops = Operators::new(n)?;
        let ws = ops.workspace();
        let implicit = (1..=n).map(|k| 1.0 / (1.0 + cfg.dt * p.nu * lambda(k))).collect();
        let m = breakpoints.len() - 1;
        let interval_of_step = (0..cfg.n_steps())
            .map(|s| {
                let t = cfg.time(s) + 0.5 * cfg.dt;
                breakpoints[1..].partition_point(|b| *b <= t).min(m - 1)
            })
            .collect();
        Ok(Self {
            cfg: *cfg,
            params: *p,
            ops,
            ws,
            implicit,
            interval_of_step,
            modes,
            z: vec![0.0; n],
            v: vec![0.0; n],
            shifted: vec![0.0; n],
            drift: vec![0.0; n],
        })
    }

    /// Sup of the image norm for controls `x[j*modes + k]`; non-finite states give `+∞`.
    pub fn sup_norm(&mut self, x: &[f64], u0: &[f64]) -> f64 {
        let n = self.cfg.n_modes;
        let dt = self.cfg.dt;
        let nonlinear = self.params.alpha != 0.0 || self.params.beta != 0.0;
        self.z.fill(0.0);
        self.v.fill(0.0);
        self.v[..u0.len().min(n)].copy_from_slice(&u0[..u0.len().min(n)]);
        let norm = |z: &[f64], v: &[f64]| z.iter().zip(v).map(|(a, b)| a + b).map(|s| s * s).sum::<f64>().sqrt();
        let mut sup = norm(&self.z, &self.v);
        for s in 0..self.cfg.n_steps() {
            let h = &x[self.interval_of_step[s] * self.modes..][..self.modes];
            if nonlinear {
                for k in 0..n {
                    self.shifted[k] = self.v[k] + self.z[k];
                }
                self.ops.nonlinear_drift(&self.shifted, &self.params, &mut self.drift, &mut self.ws);
                if self.cfg.scheme == Scheme::TamedExplicitEm {
                    let f = self.drift.iter().map(|f| f * f).sum::<f64>().sqrt();
                    let c = 1.0 / (1.0 + dt * f);
                    self.drift.iter_mut().for_each(|d| *d *= c);
                }
            } else {
                self.drift.fill(0.0);
            }
            for k in 0..n {
                self.v[k] = (self.v[k] + dt * self.drift[k]) * self.implicit[k];
            }
            for k in 0..n {
                let hk = if k < self.modes { h[k] } else { 0.0 };
                self.z[k] = (self.z[k] + dt * hk) * self.implicit[k];
            }
            let r = norm(&self.z, &self.v);
            if !r.is_finite() {
                return f64::INFINITY;
            }
            sup = sup.max(r);
        }
        sup
    }
}
