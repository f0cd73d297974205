//! Monte Carlo experiments that hold the Galerkin solver against the
//! quantitative estimates for the stochastic Burgers–Huxley equation.
//!
//! Every experiment returns an [`ExperimentReport`]: the empirical values,
//! the analytic bounds they are compared with, and a verdict that can be
//! recomputed from the stored comparisons alone.

mod energy;
mod ensemble;
mod exit_tail;
mod invariant;
mod inviscid;
mod moments;
mod report;
mod setup;
mod stability;
pub mod stats;
mod uniqueness;

pub use energy::{verify_energy_bounds, EnergyConfig};
pub use ensemble::par_map;
pub use exit_tail::{exit_time_tail, ExitTailConfig};
pub use invariant::{invariant_measure_suite, InvariantConfig, Observable};
pub use inviscid::{coupled_limit_path, inviscid_limit_sweep, InviscidConfig, Limit, LimitPath};
pub use moments::{exponential_moment_check, MomentBudget, MomentConfig};
pub use report::{
    Comparison, ExperimentReport, Provenance, Quantity, Relation, SummaryRow, Verdict,
    DEFAULT_SE_MULTIPLIER,
};
pub use setup::Setup;
pub use stability::{stability_decay, StabilityConfig};
pub use uniqueness::{verify_uniqueness_contraction, weighted_difference_path, UniquenessConfig};

use bhlab_noise::NoiseError;
use bhlab_solver::SolverError;
use bhlab_spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatesError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T, EstimatesError> {
    Err(EstimatesError::Precondition(msg.into()))
}

/// Step indices of `count` equally spaced checkpoints in `(0, n_steps]`.
pub fn checkpoint_steps(n_steps: usize, count: usize) -> Vec<usize> {
    let count = count.max(1);
    let mut v: Vec<usize> = (1..=count)
        .map(|i| ((i as f64 * n_steps as f64 / count as f64).round() as usize).clamp(1, n_steps.max(1)))
        .collect();
    v.dedup();
    v
}
