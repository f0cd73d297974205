use serde::{Deserialize, Serialize};

use crate::{lambda, SpectralError};

/// Coefficients `a_1..a_N` of `u = Σ a_k e_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SpectralField {
    type Error = SpectralError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SpectralField> for Vec<f64> {
    fn from(u: SpectralField) -> Self {
        u.coeffs
    }
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.is_empty() {
            return Err(SpectralError::Empty);
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(Self { coeffs })
    }

    /// Wraps coefficients already known to be finite. Used on hot paths.
    pub(crate) fn from_trusted(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()));
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "a field needs at least one mode");
        Self { coeffs: vec![0.0; n] }
    }

    /// The basis function `e_k` in an `n`-mode space.
    pub fn mode(n: usize, k: usize) -> Result<Self, SpectralError> {
        if k == 0 || k > n {
            return Err(SpectralError::InvalidMode(k as i64));
        }
        let mut u = Self::zeros(n);
        u.coeffs[k - 1] = 1.0;
        Ok(u)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Projection onto the first `n` modes (zero-padding when growing).
    pub fn resized(&self, n: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(n, 0.0);
        Self::from_trusted(c)
    }

    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    /// `‖∂ₓu‖² = Σ λ_k a_k²`.
    pub fn h1_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| lambda(i + 1) * a * a)
            .sum()
    }

    pub fn h1(&self) -> f64 {
        self.h1_sq().sqrt()
    }

    /// Spectral inner product, zero-padding the shorter field.
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    /// `self + s·other`, zero-padded to the longer mode count.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let n = self.n_modes().max(other.n_modes());
        let mut c = self.coeffs.clone();
        c.resize(n, 0.0);
        for (ci, oi) in c.iter_mut().zip(&other.coeffs) {
            *ci += s * oi;
        }
        Self::from_checked_arith(c)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_checked_arith(self.coeffs.iter().map(|a| s * a).collect())
    }

    fn from_checked_arith(c: Vec<f64>) -> Self {
        assert!(c.iter().all(|x| x.is_finite()), "arithmetic produced a non-finite coefficient");
        Self { coeffs: c }
    }
}

/// Samples at the interior points `x_j = j/(M+1)`, `j = 1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.is_empty() {
            return Err(SpectralError::Empty);
        }
        if let Some(index) = values.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Samples a closed-form function at the interior grid points.
    pub fn sample(grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        let h = 1.0 / (grid_size + 1) as f64;
        Self::new((1..=grid_size).map(|j| f(j as f64 * h)).collect())
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> Vec<f64> {
        let h = 1.0 / (self.grid_size() + 1) as f64;
        (1..=self.grid_size()).map(|j| j as f64 * h).collect()
    }
}
