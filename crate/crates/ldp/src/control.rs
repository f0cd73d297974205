use bhlab_noise::CovarianceSpec;
use bhlab_solver::SolverConfig;
use bhlab_spectral::SpectralField;
use serde::{Deserialize, Serialize};

use crate::LdpError;

/// Piecewise-constant control `h(t) = values[j]` on `[breakpoints[j], breakpoints[j+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawControl")]
pub struct ControlPath {
    breakpoints: Vec<f64>,
    values: Vec<SpectralField>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    breakpoints: Vec<f64>,
    values: Vec<SpectralField>,
}

impl TryFrom<RawControl> for ControlPath {
    type Error = LdpError;
    fn try_from(r: RawControl) -> Result<Self, Self::Error> {
        Self::new(r.breakpoints, r.values)
    }
}

impl ControlPath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<SpectralField>) -> Result<Self, LdpError> {
        let bad = |m: String| Err(LdpError::InvalidControl(m));
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return bad(format!("{} breakpoints for {} intervals", breakpoints.len(), values.len()));
        }
        if breakpoints[0] != 0.0 {
            return bad("the first breakpoint must be 0".into());
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return bad("breakpoints must be finite and strictly increasing".into());
        }
        let n = values[0].n_modes();
        if values.iter().any(|v| v.n_modes() != n) {
            return bad("all interval values must have the same mode count".into());
        }
        Ok(Self { breakpoints, values })
    }

    /// Equal intervals on `[0, horizon]`.
    pub fn uniform(horizon: f64, values: Vec<SpectralField>) -> Result<Self, LdpError> {
        let m = values.len();
        let bp = (0..=m).map(|j| horizon * j as f64 / m.max(1) as f64).collect();
        Self::new(bp, values)
    }

    pub fn zero(horizon: f64, intervals: usize, n_modes: usize) -> Result<Self, LdpError> {
        Self::uniform(horizon, vec![SpectralField::zeros(n_modes); intervals])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn n_intervals(&self) -> usize {
        self.values.len()
    }

    pub fn n_modes(&self) -> usize {
        self.values[0].n_modes()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.coeffs().iter().all(|x| *x == 0.0))
    }

    /// Interval containing `t` (the last one for `t ≥ T`).
    pub fn interval_at(&self, t: f64) -> usize {
        self.breakpoints[1..].partition_point(|b| *b <= t).min(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> &SpectralField {
        &self.values[self.interval_at(t)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| v.scale(c)).collect() }
    }

    /// Control held over each solver step, sampled at the step midpoint.
    pub fn forcing(&self, cfg: &SolverConfig) -> Vec<SpectralField> {
        (0..cfg.n_steps()).map(|n| self.value_at(cfg.time(n) + 0.5 * cfg.dt).clone()).collect()
    }
}

/// `½∫₀ᵀ‖h(t)‖₀² dt = ½ Σ_j Δt_j Σ_k ĥ_{jk}²/μ_k`.
pub fn rate_cost(h: &ControlPath, spec: &CovarianceSpec) -> Result<f64, LdpError> {
    let mus = spec.mus();
    let mut total = 0.0;
    for (j, v) in h.values.iter().enumerate() {
        let dt = h.breakpoints[j + 1] - h.breakpoints[j];
        let mut s = 0.0;
        for (k, x) in v.coeffs().iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            match mus.get(k) {
                Some(mu) if *mu > 0.0 => s += x * x / mu,
                _ => return Err(LdpError::InfiniteCost { mode: k + 1 }),
            }
        }
        total += dt * s;
    }
    Ok(0.5 * total)
}
