use serde::{Deserialize, Serialize};

use crate::{SpectralError, PI_SQ};

/// Coefficients of `du = (ν u_xx − α u u_x + β u(1−u)(u−γ)) dt + σ dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    nu: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = SpectralError;
    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        ModelParams::new(r.nu, r.alpha, r.beta, r.gamma)
    }
}

impl ModelParams {
    pub fn new(nu: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, SpectralError> {
        let bad = |name, value, reason| Err(SpectralError::InvalidParameter { name, value, reason });
        if !(nu.is_finite() && nu > 0.0) {
            return bad("nu", nu, "must be positive");
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return bad("alpha", alpha, "must be non-negative");
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return bad("beta", beta, "must be non-negative");
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return bad("gamma", gamma, "must lie in (0, 1)");
        }
        Ok(Self { nu, alpha, beta, gamma })
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, SpectralError> {
        Self::new(self.nu, alpha, self.beta, self.gamma)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self, SpectralError> {
        Self::new(self.nu, self.alpha, beta, self.gamma)
    }

    pub fn with_nu(self, nu: f64) -> Result<Self, SpectralError> {
        Self::new(nu, self.alpha, self.beta, self.gamma)
    }

    /// `β(1+γ²)`, the reaction growth constant appearing in every energy estimate.
    pub fn reaction_growth(&self) -> f64 {
        self.beta * (1.0 + self.gamma * self.gamma)
    }

    /// `β(1+γ+γ²)`, the reaction part of the local monotonicity constant.
    pub fn monotonicity_reaction(&self) -> f64 {
        self.beta * (1.0 + self.gamma + self.gamma * self.gamma)
    }

    /// `ν > β(1+γ²)/(2π²)`: sufficient for an invariant measure to exist.
    pub fn admits_invariant_measure(&self) -> bool {
        self.nu > self.reaction_growth() / (2.0 * PI_SQ)
    }

    /// `ν > β(1+γ²)/π²`: dissipation beats reaction growth.
    pub fn is_dissipative(&self) -> bool {
        self.nu > self.reaction_growth() / PI_SQ
    }
}
