use bhlab_noise::{stream, CovarianceSpec, NoiseCoefficient, NoiseRng};
use bhlab_operators::DEFAULT_EMBEDDING_CONSTANT;
use bhlab_solver::{SolverConfig, Stepper};
use bhlab_spectral::{lambda, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{precondition, EstimatesError};

/// Model, noise and discretization shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub params: ModelParams,
    pub noise: NoiseCoefficient,
    pub covariance: CovarianceSpec,
    pub solver: SolverConfig,
    pub seed: u64,
    #[serde(default = "default_embedding")]
    pub embedding_constant: f64,
}

fn default_embedding() -> f64 {
    DEFAULT_EMBEDDING_CONSTANT
}

impl Setup {
    pub fn new(
        params: ModelParams,
        noise: NoiseCoefficient,
        covariance: CovarianceSpec,
        solver: SolverConfig,
        seed: u64,
    ) -> Self {
        Self { params, noise, covariance, solver, seed, embedding_constant: DEFAULT_EMBEDDING_CONSTANT }
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self { params, ..self.clone() }
    }

    pub fn with_solver(&self, solver: SolverConfig) -> Self {
        Self { solver, ..self.clone() }
    }

    pub fn with_noise(&self, noise: NoiseCoefficient) -> Self {
        Self { noise, ..self.clone() }
    }

    pub fn stepper(&self) -> Result<Stepper, EstimatesError> {
        Ok(Stepper::new(&self.solver, &self.params, &self.noise, &self.covariance)?)
    }

    pub fn rng(&self, index: usize) -> NoiseRng {
        stream(self.seed, index as u64)
    }

    /// `Q` restricted to the simulated modes.
    pub fn covariance_used(&self) -> CovarianceSpec {
        let n = self.solver.n_modes.min(self.covariance.n_modes());
        CovarianceSpec::new(self.covariance.mus()[..n].to_vec()).expect("prefix of a valid spectrum")
    }

    /// `a₀²Q` for additive noise; other coefficients are rejected.
    pub fn additive_covariance(&self) -> Result<CovarianceSpec, EstimatesError> {
        match self.noise {
            NoiseCoefficient::Additive { amplitude } => {
                let q = self.covariance_used();
                Ok(q.scaled(amplitude * amplitude).unwrap_or(q))
            }
            _ => precondition("this experiment requires additive noise"),
        }
    }

    /// `Tr(a₀²Q)` for additive noise, zero amplitude giving zero.
    pub fn additive_trace(&self) -> Result<f64, EstimatesError> {
        let amp = match self.noise {
            NoiseCoefficient::Additive { amplitude } => amplitude,
            _ => return precondition("this experiment requires additive noise"),
        };
        Ok(amp * amp * self.covariance_used().trace())
    }

    pub fn additive_op_norm(&self) -> Result<f64, EstimatesError> {
        let amp = match self.noise {
            NoiseCoefficient::Additive { amplitude } => amplitude,
            _ => return precondition("this experiment requires additive noise"),
        };
        Ok(amp * amp * self.covariance_used().op_norm())
    }

    pub fn growth_constant(&self) -> f64 {
        self.noise.growth_constant(&self.covariance_used())
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.noise.lipschitz_constant(&self.covariance_used())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (1..=self.solver.n_modes).map(lambda).collect()
    }

    pub fn snapshot<E: Serialize>(&self, experiment: &E) -> Value {
        json!({
            "model": self.params,
            "noise": self.noise,
            "covariance": self.covariance,
            "solver": self.solver,
            "seed": self.seed,
            "embedding_constant": self.embedding_constant,
            "experiment": experiment,
        })
    }
}

pub(crate) fn blowup_note(failed: usize, total: usize) -> String {
    format!("{failed} of {total} paths exceeded the blow-up threshold")
}

pub(crate) fn l2_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn h1_sq(a: &[f64], lambdas: &[f64]) -> f64 {
    a.iter().zip(lambdas).map(|(x, l)| l * x * x).sum()
}

pub(crate) fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
