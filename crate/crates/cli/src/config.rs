use bhlab_estimates::{
    EnergyConfig, ExitTailConfig, InvariantConfig, Limit, MomentConfig, Observable, Setup, StabilityConfig,
    UniquenessConfig,
};
use bhlab_ldp::{MinimizerBudget, ScalingConfig};
use bhlab_noise::{CovarianceSpec, NoiseCoefficient};
use bhlab_operators::DEFAULT_EMBEDDING_CONSTANT;
use bhlab_solver::SolverConfig;
use bhlab_spectral::{ModelParams, SpectralField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::CliError;

/// `μ_k = k^{−exponent}` for `k = 1..=n_modes`, or explicit eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub exponent: f64,
    pub n_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,
}

impl CovarianceConfig {
    pub fn spec(&self) -> Result<CovarianceSpec, CliError> {
        let s = match &self.mus {
            Some(m) => CovarianceSpec::new(m.clone()),
            None => CovarianceSpec::power_law(self.n_modes, self.exponent),
        };
        s.map_err(|e| CliError::Config(format!("covariance: {e}")))
    }
}

/// One experiment block: optional replacements of the shared model, noise,
/// covariance and discretization, plus the experiment's own settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section<E> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseCoefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    pub experiment: E,
}

impl<E> Section<E> {
    fn plain(experiment: E) -> Self {
        Self { model: None, noise: None, covariance: None, solver: None, experiment }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub u0: SpectralField,
    /// Noise stream of the base seed driving the path.
    #[serde(default)]
    pub stream: u64,
    #[serde(default = "yes")]
    pub with_coeffs: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InviscidSection {
    pub limits: Vec<Limit>,
    pub values: Vec<f64>,
    pub u0: SpectralField,
    pub ensemble: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpRateConfig {
    pub radius: f64,
    pub u0: SpectralField,
    pub budget: MinimizerBudget,
}

/// Everything that determines a run. The worker count is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub embedding_constant: f64,
    pub model: ModelParams,
    pub noise: NoiseCoefficient,
    pub covariance: CovarianceConfig,
    pub solver: SolverConfig,
    pub simulate: Section<SimulateConfig>,
    pub energy: Section<EnergyConfig>,
    pub uniqueness: Section<UniquenessConfig>,
    pub inviscid: Section<InviscidSection>,
    pub exit_tail: Section<ExitTailConfig>,
    pub moments: Section<MomentConfig>,
    pub stability: Section<StabilityConfig>,
    pub invariant: Section<InvariantConfig>,
    pub ldp_rate: Section<LdpRateConfig>,
    pub ldp_scaling: Section<ScalingConfig>,
}

fn field(c: &[f64]) -> SpectralField {
    SpectralField::new(c.to_vec()).expect("finite literal")
}

impl Default for Config {
    fn default() -> Self {
        let u0 = field(&[0.5, 0.2, 0.1]);
        let v0 = field(&[-0.3, 0.1]);
        let additive = |a| NoiseCoefficient::additive(a).expect("valid amplitude");
        let low = |dt| SolverConfig::new(8, dt, 1.0).expect("valid solver");
        let low_cov = CovarianceConfig { exponent: 2.0, n_modes: 8, mus: None };
        Self {
            seed: 7,
            embedding_constant: DEFAULT_EMBEDDING_CONSTANT,
            model: ModelParams::new(1.0, 1.0, 1.0, 0.5).expect("valid model"),
            noise: additive(0.5),
            covariance: CovarianceConfig { exponent: 2.0, n_modes: 16, mus: None },
            solver: SolverConfig::new(16, 1e-3, 1.0).expect("valid solver"),
            simulate: Section::plain(SimulateConfig { u0: u0.clone(), stream: 0, with_coeffs: true }),
            energy: Section {
                noise: Some(additive(0.1)),
                ..Section::plain(EnergyConfig { u0: u0.clone(), ensemble: 200, order: 2 })
            },
            uniqueness: Section {
                noise: Some(NoiseCoefficient::multiplicative(0.5, 0.5).expect("valid coefficient")),
                ..Section::plain(UniquenessConfig { u0: u0.clone(), v0: v0.clone(), ensemble: 200, checkpoints: 5 })
            },
            inviscid: Section::plain(InviscidSection {
                limits: vec![Limit::BetaToZero, Limit::AlphaToZero],
                values: vec![0.4, 0.2, 0.1, 0.05],
                u0: u0.clone(),
                ensemble: 200,
            }),
            exit_tail: Section {
                noise: Some(additive(1.0)),
                covariance: Some(low_cov.clone()),
                solver: Some(low(2.5e-4)),
                ..Section::plain(ExitTailConfig {
                    radii: vec![0.7, 0.85, 1.0],
                    u0: SpectralField::zeros(8),
                    ensemble: 10_000,
                    dt_halving: true,
                })
            },
            moments: Section::plain(MomentConfig { epsilon: None, u0: u0.clone(), ensemble: 400, checkpoints: 5 }),
            stability: Section::plain(StabilityConfig { u0: u0.clone(), v0, ensemble: 200, checkpoints: 5 }),
            invariant: Section::plain(InvariantConfig {
                burn_in: None,
                sample_stride: None,
                n_samples: 20_000,
                observables: vec![Observable::L2Squared],
                ensemble: 1000,
                batches: 20,
                mixing_horizon: 1.0,
                mixing_ensemble: 200,
                far_start: 5.0,
                epsilon_fraction: 0.25,
            }),
            ldp_rate: Section {
                noise: Some(additive(1.0)),
                covariance: Some(low_cov.clone()),
                solver: Some(low(1e-3)),
                ..Section::plain(LdpRateConfig {
                    radius: 0.3,
                    u0: SpectralField::zeros(8),
                    budget: MinimizerBudget::default(),
                })
            },
            ldp_scaling: Section {
                noise: Some(additive(1.0)),
                covariance: Some(low_cov),
                solver: Some(low(1e-3)),
                ..Section::plain(ScalingConfig {
                    eps_values: vec![0.5, 0.25, 0.125],
                    radius: 0.3,
                    u0: SpectralField::zeros(8),
                    ensemble: 2000,
                    budget: MinimizerBudget { max_evaluations: 400, ..MinimizerBudget::default() },
                    j_hat: None,
                })
            },
        }
    }
}

/// Tables carrying a `kind` tag are replaced as a whole; other tables merge key by key.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    /// Defaults overlaid with the keys present in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let user: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut base = Table::try_from(Config::default()).map_err(|e| CliError::Internal(e.to_string()))?;
        merge(&mut base, user);
        let cfg: Config = Value::Table(base).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.covariance.spec()?;
        if !(self.embedding_constant > 0.0 && self.embedding_constant.is_finite()) {
            return Err(CliError::Config("embedding_constant must be positive".into()));
        }
        for name in SECTIONS {
            self.setup_for(name)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(bytes))
    }

    fn overrides(
        &self,
        name: &str,
    ) -> (Option<ModelParams>, Option<NoiseCoefficient>, Option<&CovarianceConfig>, Option<SolverConfig>) {
        macro_rules! pick {
            ($s:expr) => {
                ($s.model, $s.noise, $s.covariance.as_ref(), $s.solver)
            };
        }
        match name {
            "simulate" => pick!(self.simulate),
            "energy" => pick!(self.energy),
            "uniqueness" => pick!(self.uniqueness),
            "inviscid" => pick!(self.inviscid),
            "exit_tail" => pick!(self.exit_tail),
            "moments" => pick!(self.moments),
            "stability" => pick!(self.stability),
            "invariant" => pick!(self.invariant),
            "ldp_rate" => pick!(self.ldp_rate),
            "ldp_scaling" => pick!(self.ldp_scaling),
            _ => (None, None, None, None),
        }
    }

    /// Shared settings with the section's replacements applied.
    pub fn setup_for(&self, section: &str) -> Result<Setup, CliError> {
        let (m, n, c, s) = self.overrides(section);
        let covariance = c.unwrap_or(&self.covariance).spec()?;
        let solver = s.unwrap_or(self.solver);
        if covariance.n_modes() < solver.n_modes {
            return Err(CliError::Config(format!(
                "[{section}] covariance has {} modes but the solver uses {}",
                covariance.n_modes(),
                solver.n_modes
            )));
        }
        let mut setup = Setup::new(m.unwrap_or(self.model), n.unwrap_or(self.noise), covariance, solver, self.seed);
        setup.embedding_constant = self.embedding_constant;
        Ok(setup)
    }
}

pub const SECTIONS: [&str; 10] = [
    "simulate",
    "energy",
    "uniqueness",
    "inviscid",
    "exit_tail",
    "moments",
    "stability",
    "invariant",
    "ldp_rate",
    "ldp_scaling",
];
