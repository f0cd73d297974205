//! Q-Wiener noise `W = Σ √μ_k e_k β_k` and diagonal diffusion coefficients.

use bhlab_spectral::SpectralField;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rand::SeedableRng;

/// Random stream owned by one trajectory.
pub type NoiseRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("covariance eigenvalue mu_{index} = {value} must be positive and finite")]
    InvalidCovariance { index: usize, value: f64 },
    #[error("covariance needs at least one eigenvalue")]
    EmptyCovariance,
    #[error("invalid noise coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("hypothesis check needs at least one sample")]
    EmptySample,
}

/// Stream `index` of the family seeded by `base_seed`.
///
/// Streams are independent ChaCha keystreams, so results do not depend on the
/// order in which trajectories are scheduled.
pub fn stream(base_seed: u64, index: u64) -> NoiseRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Eigenvalues of `Q` in the sine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CovarianceSpec {
    mus: Vec<f64>,
}

impl TryFrom<Vec<f64>> for CovarianceSpec {
    type Error = NoiseError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<CovarianceSpec> for Vec<f64> {
    fn from(c: CovarianceSpec) -> Self {
        c.mus
    }
}

impl CovarianceSpec {
    pub fn new(mus: Vec<f64>) -> Result<Self, NoiseError> {
        if mus.is_empty() {
            return Err(NoiseError::EmptyCovariance);
        }
        for (i, &m) in mus.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(NoiseError::InvalidCovariance { index: i + 1, value: m });
            }
        }
        Ok(Self { mus })
    }

    /// `μ_k = k^{-exponent}`, `k = 1..n`.
    pub fn power_law(n: usize, exponent: f64) -> Result<Self, NoiseError> {
        Self::new((1..=n).map(|k| (k as f64).powf(-exponent)).collect())
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn n_modes(&self) -> usize {
        self.mus.len()
    }

    pub fn trace(&self) -> f64 {
        self.mus.iter().sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.mus.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, NoiseError> {
        Self::new(self.mus.iter().map(|m| m * factor).collect())
    }

    /// `√μ_k`, the per-mode increment scale for unit time.
    pub fn sqrt_mus(&self) -> Vec<f64> {
        self.mus.iter().map(|m| m.sqrt()).collect()
    }
}

/// `σ(u)`: constant, or mode-wise `g_k(u) = c₀ + c₁ tanh(⟨u, e_k⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RawCoefficient")]
pub enum NoiseCoefficient {
    Additive { amplitude: f64 },
    MultiplicativeDiagonal { base: f64, slope: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawCoefficient {
    Additive { amplitude: f64 },
    MultiplicativeDiagonal { base: f64, slope: f64 },
}

impl TryFrom<RawCoefficient> for NoiseCoefficient {
    type Error = NoiseError;
    fn try_from(r: RawCoefficient) -> Result<Self, Self::Error> {
        match r {
            RawCoefficient::Additive { amplitude } => Self::additive(amplitude),
            RawCoefficient::MultiplicativeDiagonal { base, slope } => Self::multiplicative(base, slope),
        }
    }
}

impl NoiseCoefficient {
    pub fn additive(amplitude: f64) -> Result<Self, NoiseError> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(NoiseError::InvalidCoefficient(format!("amplitude {amplitude} must be >= 0")));
        }
        Ok(Self::Additive { amplitude })
    }

    pub fn multiplicative(base: f64, slope: f64) -> Result<Self, NoiseError> {
        if !(base.is_finite() && slope.is_finite() && base >= 0.0 && slope >= 0.0) {
            return Err(NoiseError::InvalidCoefficient(format!(
                "base {base} and slope {slope} must be >= 0"
            )));
        }
        Ok(Self::MultiplicativeDiagonal { base, slope })
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Self::Additive { .. })
    }

    /// True when `σ ≡ 0`.
    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Additive { amplitude } => amplitude == 0.0,
            Self::MultiplicativeDiagonal { base, slope } => base == 0.0 && slope == 0.0,
        }
    }

    /// Mode-wise gain `g_k` for coefficient `a_k` of the state.
    #[inline]
    pub fn gain(&self, a_k: f64) -> f64 {
        match *self {
            Self::Additive { amplitude } => amplitude,
            Self::MultiplicativeDiagonal { base, slope } => base + slope * a_k.tanh(),
        }
    }

    /// Growth constant `K` with `‖σ(u)‖²_{L_Q} ≤ K(1 + ‖u‖²)`.
    pub fn growth_constant(&self, spec: &CovarianceSpec) -> f64 {
        let g = match *self {
            Self::Additive { amplitude } => amplitude,
            Self::MultiplicativeDiagonal { base, slope } => base + slope,
        };
        g * g * spec.trace()
    }

    /// Lipschitz constant `L` with `‖σ(u)−σ(v)‖²_{L_Q} ≤ L‖u−v‖²`.
    pub fn lipschitz_constant(&self, spec: &CovarianceSpec) -> f64 {
        match *self {
            Self::Additive { .. } => 0.0,
            Self::MultiplicativeDiagonal { slope, .. } => slope * slope * spec.op_norm(),
        }
    }

    /// `‖σ(u)‖²_{L_Q} = Σ μ_k g_k(u)²`.
    pub fn hs_norm_sq(&self, u: &SpectralField, spec: &CovarianceSpec) -> f64 {
        spec.mus()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let g = self.gain(u.coeffs().get(i).copied().unwrap_or(0.0));
                m * g * g
            })
            .sum()
    }

    /// `‖σ(u)−σ(v)‖²_{L_Q}`.
    pub fn hs_diff_norm_sq(&self, u: &SpectralField, v: &SpectralField, spec: &CovarianceSpec) -> f64 {
        spec.mus()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let at = |f: &SpectralField| self.gain(f.coeffs().get(i).copied().unwrap_or(0.0));
                let d = at(u) - at(v);
                m * d * d
            })
            .sum()
    }

    /// Covariance of the additive forcing `a₀ W`, i.e. `a₀² Q`.
    pub fn effective_covariance(&self, spec: &CovarianceSpec) -> Option<CovarianceSpec> {
        match *self {
            Self::Additive { amplitude } if amplitude > 0.0 => spec.scaled(amplitude * amplitude).ok(),
            _ => None,
        }
    }
}

/// Writes `√μ_k·√dt·ξ_k` into `out` given `sqrt_mus = √μ_k`.
pub fn fill_increment(sqrt_mus: &[f64], dt: f64, rng: &mut NoiseRng, out: &mut [f64]) {
    let s = dt.sqrt();
    for (o, m) in out.iter_mut().zip(sqrt_mus) {
        let xi: f64 = rng.sample(StandardNormal);
        *o = m * s * xi;
    }
}

/// One increment `ΔW` over a step of length `dt`.
pub fn sample_increment(spec: &CovarianceSpec, dt: f64, rng: &mut NoiseRng) -> Result<SpectralField, NoiseError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(NoiseError::InvalidStep(dt));
    }
    let mut out = vec![0.0; spec.n_modes()];
    fill_increment(&spec.sqrt_mus(), dt, rng, &mut out);
    Ok(SpectralField::new(out).expect("finite increment"))
}

/// `σ(u) dW`, mode by mode.
pub fn apply_sigma(coef: &NoiseCoefficient, u: &SpectralField, dw: &SpectralField) -> SpectralField {
    let c = dw
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, w)| coef.gain(u.coeffs().get(i).copied().unwrap_or(0.0)) * w)
        .collect();
    SpectralField::new(c).expect("finite noise")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisMargins {
    pub k_emp: f64,
    pub l_emp: f64,
    pub k_analytic: f64,
    pub l_analytic: f64,
}

impl HypothesisMargins {
    pub fn holds(&self) -> bool {
        self.k_emp <= self.k_analytic * (1.0 + 1e-12) && self.l_emp <= self.l_analytic * (1.0 + 1e-12)
    }
}

/// Empirical growth and Lipschitz ratios over sampled pairs.
///
/// Identical pairs are skipped for the Lipschitz ratio.
pub fn hypothesis_margins(
    coef: &NoiseCoefficient,
    spec: &CovarianceSpec,
    pairs: &[(SpectralField, SpectralField)],
) -> Result<HypothesisMargins, NoiseError> {
    if pairs.is_empty() {
        return Err(NoiseError::EmptySample);
    }
    let mut k_emp: f64 = 0.0;
    let mut l_emp: f64 = 0.0;
    for (u, v) in pairs {
        for f in [u, v] {
            k_emp = k_emp.max(coef.hs_norm_sq(f, spec) / (1.0 + f.l2_sq()));
        }
        let d = u.sub(v).l2_sq();
        if d > 0.0 {
            l_emp = l_emp.max(coef.hs_diff_norm_sq(u, v, spec) / d);
        }
    }
    Ok(HypothesisMargins {
        k_emp,
        l_emp,
        k_analytic: coef.growth_constant(spec),
        l_analytic: coef.lipschitz_constant(spec),
    })
}
