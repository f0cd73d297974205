//! Time integration of the `N`-mode Galerkin system
//!
//! ```text
//! da_k = (−νλ_k a_k − αB_k(a) + βc_k(a)) dt + g_k(a) √μ_k dβ_k
//! ```
//!
//! The linear part is implicit, the nonlinear drift and the noise explicit,
//! so each step is a diagonal solve.

mod config;
mod export;
mod skeleton;
mod stepper;

pub use config::{Scheme, SolverConfig, DEFAULT_BLOWUP_THRESHOLD};
pub use export::{read_binary, BinaryDump};
pub use skeleton::{skeleton_solve, SkeletonMode};
pub use stepper::{coupled_integrate, integrate, step, BlowUp, Stepper};

use bhlab_noise::NoiseError;
use bhlab_spectral::{NormEvaluator, SpectralError, SpectralField};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("blow-up at t = {time}: L2 norm {norm} exceeds the threshold")]
    BlowUp {
        time: f64,
        norm: f64,
        partial: Box<Trajectory>,
        partner: Option<Box<Trajectory>>,
    },
    #[error("mode count mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Identity of the random stream that drove a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamId {
    pub base_seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub l2: f64,
    pub h1: f64,
    pub l4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub noise_stream_id: Option<StreamId>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    pub(crate) fn with_capacity(n: usize, stream: Option<StreamId>) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            noise_stream_id: stream,
            diagnostics: Vec::with_capacity(n),
        }
    }

    pub(crate) fn push(&mut self, t: f64, state: &[f64], l4_pow4: f64) {
        let u = SpectralField::new(state.to_vec()).expect("states are checked finite");
        self.diagnostics.push(Diagnostics { l2: u.l2(), h1: u.h1(), l4: l4_pow4.powf(0.25) });
        self.times.push(t);
        self.states.push(u);
    }

    /// Trajectory from given states; `‖u‖_{L⁴}` is evaluated by exact quadrature.
    pub fn from_states(times: Vec<f64>, states: Vec<SpectralField>) -> Result<Self, SolverError> {
        if times.len() != states.len() {
            return Err(SolverError::InvalidConfig(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let n = states.first().map_or(1, SpectralField::n_modes);
        let mut eval = NormEvaluator::new(n)?;
        let diagnostics = states
            .iter()
            .map(|u| {
                let nm = eval.norms(&u.resized(n));
                Diagnostics { l2: u.l2(), h1: u.h1(), l4: nm.l4 }
            })
            .collect();
        Ok(Self { times, states, noise_stream_id: None, diagnostics })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&SpectralField> {
        self.states.last()
    }

    /// `max_n ‖u(t_n)‖_{L²}`.
    pub fn sup_l2(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.l2).fold(0.0, f64::max)
    }
}
