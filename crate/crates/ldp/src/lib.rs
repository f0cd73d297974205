//! Freidlin–Wentzell machinery for the Burgers–Huxley equation: controlled
//! skeleton equations, the map `Θ(z) = z + Ψ(z)`, the quadratic rate
//! function and its minimisation over exits from an `L²` ball.

mod control;
mod minimize;
mod scaling;
mod theta;

pub use control::{rate_cost, ControlPath};
pub use minimize::{minimize_rate_to_exit, MinimizeConfig, MinimizerBudget, MinimizerOutcome, MinimizerStatus};
pub use scaling::{small_noise_scaling, ScalingConfig};
pub use theta::{theta_of_control, ImageEvaluator, RateEvaluation};

use bhlab_estimates::EstimatesError;
use bhlab_noise::NoiseError;
use bhlab_solver::SolverError;
use bhlab_spectral::{lambda, SpectralError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("invalid control path: {0}")]
    InvalidControl(String),
    #[error("control acts on mode {mode}, which carries no noise: infinite cost")]
    InfiniteCost { mode: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Estimates(#[from] EstimatesError),
}

/// Controllability Gramian of `dz/dt = −νλ_k z + h` with cost `h²/μ_k` over `[0, T]`:
/// `G_T = μ_k (1 − e^{−2νλ_k T})/(2νλ_k)`.
pub fn heat_gramian(mu: f64, nu: f64, k: usize, t: f64) -> f64 {
    let a = nu * lambda(k);
    mu * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a)
}

/// Minimal cost `r²/(2G_T)` of steering mode `k` from 0 to amplitude `r` at time `T`.
pub fn linear_exit_cost(r: f64, mu: f64, nu: f64, k: usize, t: f64) -> f64 {
    r * r / (2.0 * heat_gramian(mu, nu, k, t))
}
