use serde::{Deserialize, Serialize};

use crate::SolverError;

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Linear part implicit, nonlinear drift and noise explicit.
    #[default]
    SemiImplicitEm,
    /// As above, with the nonlinear drift `f` replaced by `f/(1 + dt‖f‖)`.
    TamedExplicitEm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct SolverConfig {
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub blowup_threshold: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_modes: usize,
    dt: f64,
    t_end: f64,
    #[serde(default)]
    scheme: Scheme,
    #[serde(default = "default_threshold")]
    blowup_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}

impl TryFrom<RawConfig> for SolverConfig {
    type Error = SolverError;
    fn try_from(r: RawConfig) -> Result<Self, Self::Error> {
        let c = SolverConfig {
            n_modes: r.n_modes,
            dt: r.dt,
            t_end: r.t_end,
            scheme: r.scheme,
            blowup_threshold: r.blowup_threshold,
        };
        c.validate()?;
        Ok(c)
    }
}

impl SolverConfig {
    pub fn new(n_modes: usize, dt: f64, t_end: f64) -> Result<Self, SolverError> {
        let c = Self {
            n_modes,
            dt,
            t_end,
            scheme: Scheme::SemiImplicitEm,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(self, dt: f64) -> Result<Self, SolverError> {
        let c = Self { dt, ..self };
        c.validate()?;
        Ok(c)
    }

    pub fn with_t_end(self, t_end: f64) -> Result<Self, SolverError> {
        let c = Self { t_end, ..self };
        c.validate()?;
        Ok(c)
    }

    pub fn with_n_modes(self, n_modes: usize) -> Result<Self, SolverError> {
        let c = Self { n_modes, ..self };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if self.n_modes == 0 {
            return bad("n_modes must be at least 1".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return bad(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!("blowup_threshold = {} must be positive", self.blowup_threshold));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return bad(format!("t_end = {} is not a whole number of steps of dt = {}", self.t_end, self.dt));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// `t_n = n·dt`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}
