//! Sine-basis representation of fields on the unit interval with homogeneous
//! Dirichlet boundary conditions.
//!
//! Fields are stored as coefficients against the orthonormal basis
//! `e_k(x) = √2 sin(kπx)`, which diagonalises `A = -∂²/∂x²` with eigenvalues
//! `λ_k = k²π²`. Physical samples live on interior points `x_j = j/(M+1)`.

mod error;
mod field;
mod grid;
mod params;

pub use error::SpectralError;
pub use field::{PhysicalField, SpectralField};
pub use grid::{
    cubic_grid_points, inner_product, norm_grid_points, norms, quadratic_grid_points,
    to_physical, to_spectral, NormEvaluator, Norms, SineGrid,
};
pub use params::ModelParams;

use std::f64::consts::PI;

/// `π²`, the first Dirichlet eigenvalue and the Poincaré constant of (0,1).
pub const PI_SQ: f64 = PI * PI;

/// Eigenvalue `λ_k = k²π²` of `A` for a signed mode index.
pub fn eigenvalue(k: i64) -> Result<f64, SpectralError> {
    if k < 1 {
        return Err(SpectralError::InvalidMode(k));
    }
    Ok(lambda(k as usize))
}

/// Unchecked eigenvalue for 1-based `k`.
#[inline]
pub fn lambda(k: usize) -> f64 {
    let k = k as f64;
    k * k * PI_SQ
}

/// Eigenvalues `λ_1..λ_n`.
pub fn eigenvalues(n: usize) -> Vec<f64> {
    (1..=n).map(lambda).collect()
}
