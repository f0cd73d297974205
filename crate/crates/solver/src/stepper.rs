use bhlab_noise::{fill_increment, CovarianceSpec, NoiseCoefficient, NoiseRng};
use bhlab_operators::{Operators, Workspace};
use bhlab_spectral::{lambda, ModelParams, SpectralField};

use crate::{Scheme, SolverConfig, SolverError, StreamId, Trajectory};

/// Where and how a path left the admissible region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
}

/// Reusable single-step integrator for one configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SolverConfig,
    params: ModelParams,
    coef: NoiseCoefficient,
    sqrt_mus: Vec<f64>,
    implicit: Vec<f64>,
    ops: Operators,
    ws: Workspace,
    drift: Vec<f64>,
    drift2: Vec<f64>,
    dw: Vec<f64>,
    track_l4: bool,
}

impl Stepper {
    pub fn new(
        cfg: &SolverConfig,
        params: &ModelParams,
        coef: &NoiseCoefficient,
        spec: &CovarianceSpec,
    ) -> Result<Self, SolverError> {
        cfg.validate()?;
        let n = cfg.n_modes;
        let mut sqrt_mus = spec.sqrt_mus();
        sqrt_mus.resize(n, 0.0);
        let implicit = (1..=n).map(|k| 1.0 / (1.0 + cfg.dt * params.nu * lambda(k))).collect();
        let ops = Operators::new(n)?;
        let ws = ops.workspace();
        Ok(Self {
            cfg: *cfg,
            params: *params,
            coef: *coef,
            sqrt_mus,
            implicit,
            ops,
            ws,
            drift: vec![0.0; n],
            drift2: vec![0.0; n],
            dw: vec![0.0; n],
            track_l4: true,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_modes(&self) -> usize {
        self.cfg.n_modes
    }

    /// When off, `‖u‖_{L⁴}` is reported as 0 and linear problems skip all grid work.
    pub fn set_track_l4(&mut self, on: bool) {
        self.track_l4 = on;
    }

    fn nonlinear(&self) -> bool {
        self.params.alpha != 0.0 || self.params.beta != 0.0
    }

    /// Nonlinear drift at `a` (tamed if configured); returns `‖a‖⁴_{L⁴}`.
    fn drift_at(&mut self, a: &[f64], second: bool) -> f64 {
        let skip = !self.nonlinear() && !self.track_l4;
        let out = if second { &mut self.drift2 } else { &mut self.drift };
        if skip {
            out.fill(0.0);
            return 0.0;
        }
        let l4 = self.ops.nonlinear_drift(a, &self.params, out, &mut self.ws);
        if self.cfg.scheme == Scheme::TamedExplicitEm {
            let norm = out.iter().map(|f| f * f).sum::<f64>().sqrt();
            let s = 1.0 / (1.0 + self.cfg.dt * norm);
            out.iter_mut().for_each(|f| *f *= s);
        }
        if self.track_l4 { l4 } else { 0.0 }
    }

    /// `a ← (a + dt·f + σ(a)ΔW)/(1 + dt·ν·λ)`.
    fn update(&self, a: &mut [f64], second: bool, dw: Option<&[f64]>) {
        let dt = self.cfg.dt;
        let drift = if second { &self.drift2 } else { &self.drift };
        match dw {
            Some(dw) => {
                for k in 0..a.len() {
                    let noise = self.coef.gain(a[k]) * dw[k];
                    a[k] = (a[k] + dt * drift[k] + noise) * self.implicit[k];
                }
            }
            None => {
                for k in 0..a.len() {
                    a[k] = (a[k] + dt * drift[k]) * self.implicit[k];
                }
            }
        }
    }

    /// Deterministic step with an extra explicit forcing `a ← (a + dt·(f(a+shift) + h))/(1 + dt·ν·λ)`.
    pub(crate) fn forced_update(&mut self, a: &mut [f64], shift: Option<&[f64]>, forcing: Option<&[f64]>) -> f64 {
        let l4 = match shift {
            Some(s) => {
                let shifted: Vec<f64> = a.iter().zip(s).map(|(x, y)| x + y).collect();
                self.drift_at(&shifted, false)
            }
            None => self.drift_at(a, false),
        };
        if let Some(h) = forcing {
            self.drift.iter_mut().zip(h).for_each(|(d, h)| *d += h);
        }
        self.update(a, false, None);
        l4
    }

    pub(crate) fn check(&self, a: &[f64], step: usize) -> Result<(), BlowUp> {
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > self.cfg.blowup_threshold {
            return Err(BlowUp { step, time: self.cfg.time(step), norm });
        }
        Ok(())
    }

    /// `‖a‖⁴_{L⁴}` by exact quadrature.
    pub fn l4_pow4(&mut self, a: &[f64]) -> f64 {
        self.ops.l4_pow4(a, &mut self.ws)
    }

    /// One step driven by a given Wiener increment `ΔW` (before `σ` is applied).
    pub fn advance_with(&mut self, a: &mut [f64], dw: &[f64]) -> f64 {
        let l4 = self.drift_at(a, false);
        self.update(a, false, Some(dw));
        l4
    }

    /// Draws `ΔW` for one step into an internal buffer and returns it.
    pub fn draw_increment(&mut self, rng: &mut NoiseRng) -> &[f64] {
        fill_increment(&self.sqrt_mus, self.cfg.dt, rng, &mut self.dw);
        &self.dw
    }

    /// Integrates one path, calling `observe(n, t_n, a(t_n), ‖a(t_n)‖⁴_{L⁴})` for `n = 0..=n_steps`.
    pub fn run<F>(&mut self, u0: &[f64], rng: &mut NoiseRng, mut observe: F) -> Result<Vec<f64>, BlowUp>
    where
        F: FnMut(usize, f64, &[f64], f64),
    {
        let mut a = fit(u0, self.cfg.n_modes);
        self.check(&a, 0)?;
        let noisy = !self.coef.is_zero();
        for n in 0..self.cfg.n_steps() {
            let l4 = self.drift_at(&a, false);
            observe(n, self.cfg.time(n), &a, l4);
            if noisy {
                fill_increment(&self.sqrt_mus, self.cfg.dt, rng, &mut self.dw);
                let dw = std::mem::take(&mut self.dw);
                self.update(&mut a, false, Some(&dw));
                self.dw = dw;
            } else {
                self.update(&mut a, false, None);
            }
            self.check(&a, n + 1)?;
        }
        let n = self.cfg.n_steps();
        let l4 = if self.track_l4 { self.l4_pow4(&a) } else { 0.0 };
        observe(n, self.cfg.time(n), &a, l4);
        Ok(a)
    }

    /// Two paths driven by the same increments.
    #[allow(clippy::type_complexity)]
    pub fn run_coupled<F>(
        &mut self,
        u0: &[f64],
        v0: &[f64],
        rng: &mut NoiseRng,
        mut observe: F,
    ) -> Result<(Vec<f64>, Vec<f64>), BlowUp>
    where
        F: FnMut(usize, f64, (&[f64], f64), (&[f64], f64)),
    {
        let mut a = fit(u0, self.cfg.n_modes);
        let mut b = fit(v0, self.cfg.n_modes);
        self.check(&a, 0)?;
        self.check(&b, 0)?;
        let noisy = !self.coef.is_zero();
        for n in 0..self.cfg.n_steps() {
            let la = self.drift_at(&a, false);
            let lb = self.drift_at(&b, true);
            observe(n, self.cfg.time(n), (&a, la), (&b, lb));
            if noisy {
                fill_increment(&self.sqrt_mus, self.cfg.dt, rng, &mut self.dw);
                let dw = std::mem::take(&mut self.dw);
                self.update(&mut a, false, Some(&dw));
                self.update(&mut b, true, Some(&dw));
                self.dw = dw;
            } else {
                self.update(&mut a, false, None);
                self.update(&mut b, true, None);
            }
            self.check(&a, n + 1)?;
            self.check(&b, n + 1)?;
        }
        let n = self.cfg.n_steps();
        let (la, lb) = if self.track_l4 { (self.l4_pow4(&a), self.l4_pow4(&b)) } else { (0.0, 0.0) };
        observe(n, self.cfg.time(n), (&a, la), (&b, lb));
        Ok((a, b))
    }

    /// Full trajectory with diagnostics at every step.
    pub fn integrate(
        &mut self,
        u0: &SpectralField,
        rng: &mut NoiseRng,
        stream: Option<StreamId>,
    ) -> Result<Trajectory, SolverError> {
        let mut traj = Trajectory::with_capacity(self.cfg.n_steps() + 1, stream);
        let res = self.run(u0.coeffs(), rng, |_, t, a, l4| traj.push(t, a, l4));
        match res {
            Ok(_) => Ok(traj),
            Err(b) => Err(SolverError::BlowUp { time: b.time, norm: b.norm, partial: Box::new(traj), partner: None }),
        }
    }

    pub fn coupled_integrate(
        &mut self,
        u0: &SpectralField,
        v0: &SpectralField,
        rng: &mut NoiseRng,
        stream: Option<StreamId>,
    ) -> Result<(Trajectory, Trajectory), SolverError> {
        let cap = self.cfg.n_steps() + 1;
        let mut tu = Trajectory::with_capacity(cap, stream);
        let mut tv = Trajectory::with_capacity(cap, stream);
        let res = self.run_coupled(u0.coeffs(), v0.coeffs(), rng, |_, t, (a, la), (b, lb)| {
            tu.push(t, a, la);
            tv.push(t, b, lb);
        });
        match res {
            Ok(_) => Ok((tu, tv)),
            Err(b) => Err(SolverError::BlowUp {
                time: b.time,
                norm: b.norm,
                partial: Box::new(tu),
                partner: Some(Box::new(tv)),
            }),
        }
    }
}

fn fit(u: &[f64], n: usize) -> Vec<f64> {
    let mut a = u.to_vec();
    a.resize(n, 0.0);
    a
}

/// One semi-implicit step of length `dt` with the default blow-up threshold.
pub fn step(
    state: &SpectralField,
    p: &ModelParams,
    coef: &NoiseCoefficient,
    spec: &CovarianceSpec,
    dt: f64,
    rng: &mut NoiseRng,
) -> Result<SpectralField, SolverError> {
    let cfg = SolverConfig::new(state.n_modes(), dt, dt)?;
    let mut s = Stepper::new(&cfg, p, coef, spec)?;
    s.set_track_l4(false);
    let mut a = state.coeffs().to_vec();
    let dw = s.draw_increment(rng).to_vec();
    s.advance_with(&mut a, &dw);
    if let Err(b) = s.check(&a, 1) {
        let mut partial = Trajectory::with_capacity(1, None);
        partial.push(0.0, state.coeffs(), 0.0);
        return Err(SolverError::BlowUp { time: b.time, norm: b.norm, partial: Box::new(partial), partner: None });
    }
    Ok(SpectralField::new(a)?)
}

pub fn integrate(
    u0: &SpectralField,
    cfg: &SolverConfig,
    p: &ModelParams,
    coef: &NoiseCoefficient,
    spec: &CovarianceSpec,
    rng: &mut NoiseRng,
) -> Result<Trajectory, SolverError> {
    Stepper::new(cfg, p, coef, spec)?.integrate(u0, rng, None)
}

pub fn coupled_integrate(
    u0: &SpectralField,
    v0: &SpectralField,
    cfg: &SolverConfig,
    p: &ModelParams,
    coef: &NoiseCoefficient,
    spec: &CovarianceSpec,
    rng: &mut NoiseRng,
) -> Result<(Trajectory, Trajectory), SolverError> {
    Stepper::new(cfg, p, coef, spec)?.coupled_integrate(u0, v0, rng, None)
}
