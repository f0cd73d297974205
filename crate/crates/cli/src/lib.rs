//! Configuration, orchestration and result files for the `bhlab` command.

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use bhlab_estimates::{
    exit_time_tail, exponential_moment_check, invariant_measure_suite, inviscid_limit_sweep, stability_decay,
    verify_energy_bounds, verify_uniqueness_contraction, Comparison, EstimatesError, ExperimentReport, InviscidConfig,
    Provenance, Setup, Verdict,
};
use bhlab_ldp::{
    linear_exit_cost, minimize_rate_to_exit, small_noise_scaling, ControlPath, LdpError, MinimizeConfig,
    MinimizerStatus,
};
use bhlab_solver::{integrate, Trajectory};
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::Config;
pub use output::{write_outputs, OutputPaths};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// A parameter outside an experiment's admissible range.
    #[error("{0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Precondition(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<EstimatesError> for CliError {
    fn from(e: EstimatesError) -> Self {
        match e {
            EstimatesError::Precondition(m) => CliError::Precondition(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<LdpError> for CliError {
    fn from(e: LdpError) -> Self {
        match e {
            LdpError::Estimates(e) => e.into(),
            e @ (LdpError::Precondition(_) | LdpError::InvalidControl(_) | LdpError::InfiniteCost { .. }) => {
                CliError::Precondition(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Experiment {
    /// One trajectory written as CSV.
    Simulate,
    /// Second and higher energy moments against their bounds.
    Energy,
    /// Weighted difference of two coupled solutions.
    Uniqueness,
    /// Coupled error as β or α goes to zero.
    Inviscid,
    /// Probability of leaving an L2 ball against the tail bound.
    ExitTail,
    /// Exponential moments of the energy functional.
    Moments,
    /// Mean-square decay of the difference of two solutions.
    Stability,
    /// Time against ensemble averages, mixing and stationary moments.
    Invariant,
    /// Minimal control cost of an exit.
    LdpRate,
    /// Small-noise exit probabilities against the minimal cost.
    LdpScaling,
    /// Every experiment except `simulate`.
    All,
    /// Prints the default configuration as TOML.
    PrintDefaults,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Energy => "energy",
            Experiment::Uniqueness => "uniqueness",
            Experiment::Inviscid => "inviscid",
            Experiment::ExitTail => "exit-tail",
            Experiment::Moments => "moments",
            Experiment::Stability => "stability",
            Experiment::Invariant => "invariant",
            Experiment::LdpRate => "ldp-rate",
            Experiment::LdpScaling => "ldp-scaling",
            Experiment::All => "all",
            Experiment::PrintDefaults => "print-defaults",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "bhlab", version, about = "Monte Carlo experiments for the stochastic Burgers-Huxley equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Experiment,
    /// TOML file; keys not given keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory of the run directories.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// Replaces the configured base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "BHLAB_WORKERS")]
    pub workers: Option<usize>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Reports and by-products of one invocation.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub reports: Vec<ExperimentReport>,
    pub trajectory: Option<Trajectory>,
    pub control: Option<ControlPath>,
}

impl RunOutcome {
    /// Violated beats inconclusive beats respected.
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| r.verdict == Verdict::BoundViolated) {
            EXIT_VIOLATED
        } else if self.reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_OK
        }
    }
}

fn ldp_rate(setup: &Setup, c: &config::LdpRateConfig) -> Result<(ExperimentReport, Option<ControlPath>), CliError> {
    let q = setup.additive_covariance()?;
    let m = MinimizeConfig { radius: c.radius, u0: c.u0.clone(), budget: c.budget };
    let out = minimize_rate_to_exit(&m, &setup.params, &q, &setup.solver)?;
    let mut r = ExperimentReport::new(
        "ldp-rate",
        "minimal control cost of leaving an L2 ball, as an upper bound over piecewise-constant controls",
        setup.snapshot(c),
        out.evaluations,
    );
    r.quantity("J_hat (upper bound on the exit cost)", out.j_hat, Provenance::Derived, None);
    r.quantity("deterministic sup norm", out.deterministic_sup, Provenance::Derived, None);
    r.quantity("optimizer evaluations", out.evaluations as f64, Provenance::Parameter, None);
    r.note(format!("optimizer status: {:?}", out.status));
    let control = out.best.as_ref().map(|b| b.control.clone());
    match &out.best {
        Some(best) => {
            r.quantity("certified image sup norm", best.image_sup(), Provenance::Derived, None);
            r.compare(Comparison::at_least("exit certificate", best.image_sup(), 0.0, c.radius));
        }
        None => r.inconclusive("no exit control found within the optimizer budget"),
    }
    let p = &setup.params;
    if p.alpha == 0.0 && p.beta == 0.0 && c.u0.l2_sq() == 0.0 && out.status == MinimizerStatus::Feasible {
        let j = linear_exit_cost(c.radius, q.mus()[0], p.nu, 1, setup.solver.t_end);
        r.quantity("Gramian exit cost of mode 1", j, Provenance::AnalyticBound, None);
        r.compare(Comparison::at_most("J_hat at most 5% above the Gramian cost", out.j_hat, 0.0, 1.05 * j));
        r.compare(Comparison::at_least("J_hat at least 99% of the Gramian cost", out.j_hat, 0.0, 0.99 * j));
    }
    Ok((r, control))
}

fn simulate(cfg: &Config) -> Result<Trajectory, CliError> {
    let s = cfg.setup_for("simulate")?;
    let c = &cfg.simulate.experiment;
    let mut rng = s.rng(c.stream as usize);
    integrate(&c.u0, &s.solver, &s.params, &s.noise, &s.covariance_used(), &mut rng)
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs `exp` on the current rayon pool.
pub fn run_experiment(exp: Experiment, cfg: &Config) -> Result<RunOutcome, CliError> {
    let mut out = RunOutcome::default();
    let mut push = |r: ExperimentReport| out.reports.push(r);
    match exp {
        Experiment::Simulate => out.trajectory = Some(simulate(cfg)?),
        Experiment::Energy => push(verify_energy_bounds(&cfg.setup_for("energy")?, &cfg.energy.experiment)?),
        Experiment::Uniqueness => {
            push(verify_uniqueness_contraction(&cfg.setup_for("uniqueness")?, &cfg.uniqueness.experiment)?)
        }
        Experiment::Inviscid => {
            let s = cfg.setup_for("inviscid")?;
            let c = &cfg.inviscid.experiment;
            for &limit in &c.limits {
                let ic = InviscidConfig { limit, values: c.values.clone(), u0: c.u0.clone(), ensemble: c.ensemble };
                push(inviscid_limit_sweep(&s, &ic)?);
            }
        }
        Experiment::ExitTail => push(exit_time_tail(&cfg.setup_for("exit_tail")?, &cfg.exit_tail.experiment)?),
        Experiment::Moments => push(exponential_moment_check(&cfg.setup_for("moments")?, &cfg.moments.experiment)?),
        Experiment::Stability => push(stability_decay(&cfg.setup_for("stability")?, &cfg.stability.experiment)?),
        Experiment::Invariant => {
            push(invariant_measure_suite(&cfg.setup_for("invariant")?, &cfg.invariant.experiment)?)
        }
        Experiment::LdpRate => {
            let (r, control) = ldp_rate(&cfg.setup_for("ldp_rate")?, &cfg.ldp_rate.experiment)?;
            push(r);
            out.control = control;
        }
        Experiment::LdpScaling => {
            push(small_noise_scaling(&cfg.setup_for("ldp_scaling")?, &cfg.ldp_scaling.experiment)?)
        }
        Experiment::All => {
            for e in [
                Experiment::Energy,
                Experiment::Uniqueness,
                Experiment::Inviscid,
                Experiment::ExitTail,
                Experiment::Moments,
                Experiment::Stability,
                Experiment::Invariant,
                Experiment::LdpRate,
                Experiment::LdpScaling,
            ] {
                let sub = run_experiment(e, cfg)?;
                out.reports.extend(sub.reports);
                out.control = out.control.or(sub.control);
            }
        }
        Experiment::PrintDefaults => {}
    }
    Ok(out)
}

/// Loads the configuration and applies the seed override.
pub fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<Config, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            Config::from_toml_str(&text)?
        }
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if cli.command == Experiment::PrintDefaults {
        print!("{}", Config::default().to_toml_string());
        return Ok(EXIT_OK);
    }
    let cfg = load_config(cli.config.as_ref(), cli.seed)?;
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let outcome = pool.install(|| run_experiment(cli.command, &cfg))?;
    let code = outcome.exit_code();
    let paths = write_outputs(&cli.out, cli.command.name(), &cfg, workers, &outcome, code)?;
    match cli.format {
        Format::Json => println!("{}", output::reports_json(&outcome.reports)?),
        Format::Csv => print!("{}", output::summary_csv(&outcome.reports)?),
    }
    for r in &outcome.reports {
        eprintln!("{}: {}", r.name, r.verdict.as_str());
    }
    eprintln!("results in {}", paths.dir.display());
    Ok(code)
}

/// Entry point shared by the binary and the tests; returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bhlab: {e}");
            e.exit_code()
        }
    }
}
