use bhlab_noise::{CovarianceSpec, NoiseCoefficient};
use bhlab_spectral::{ModelParams, SpectralField};

use crate::{SolverConfig, SolverError, Stepper, Trajectory};

/// Deterministic controlled problems solved on the solver's time grid.
#[derive(Debug, Clone, Copy)]
pub enum SkeletonMode<'a> {
    /// `dz/dt + νAz = h`, `z(0) = 0`; `forcing[n]` acts on `[t_n, t_{n+1})`.
    Heat { forcing: &'a [SpectralField] },
    /// `dv/dt + νAv = −αB(v+ψ) + βc(v+ψ)`, `v(0) = u₀`; `psi[n]` is `ψ(t_n)`.
    PsiMap { u0: &'a SpectralField, psi: &'a [SpectralField] },
}

pub fn skeleton_solve(mode: SkeletonMode<'_>, cfg: &SolverConfig, p: &ModelParams) -> Result<Trajectory, SolverError> {
    let n = cfg.n_modes;
    let steps = cfg.n_steps();
    let quiet = NoiseCoefficient::Additive { amplitude: 0.0 };
    let unit = CovarianceSpec::new(vec![1.0])?;
    let (mut stepper, mut a, path) = match mode {
        SkeletonMode::Heat { forcing } => {
            let heat = ModelParams::new(p.nu, 0.0, 0.0, p.gamma)?;
            (Stepper::new(cfg, &heat, &quiet, &unit)?, vec![0.0; n], forcing)
        }
        SkeletonMode::PsiMap { u0, psi } => {
            (Stepper::new(cfg, p, &quiet, &unit)?, u0.resized(n).into_coeffs(), psi)
        }
    };
    if path.len() < steps {
        return Err(SolverError::InvalidConfig(format!(
            "skeleton input has {} samples, the grid needs {steps}",
            path.len()
        )));
    }
    let fit = |f: &SpectralField| -> Vec<f64> { f.resized(n).into_coeffs() };
    let mut traj = Trajectory::with_capacity(steps + 1, None);
    for (k, input) in path.iter().take(steps).enumerate() {
        let l4 = stepper.l4_pow4(&a);
        traj.push(cfg.time(k), &a, l4);
        let input = fit(input);
        match mode {
            SkeletonMode::Heat { .. } => stepper.forced_update(&mut a, None, Some(&input)),
            SkeletonMode::PsiMap { .. } => stepper.forced_update(&mut a, Some(&input), None),
        };
        if let Err(b) = stepper.check(&a, k + 1) {
            return Err(SolverError::BlowUp { time: b.time, norm: b.norm, partial: Box::new(traj), partner: None });
        }
    }
    let l4 = stepper.l4_pow4(&a);
    traj.push(cfg.time(steps), &a, l4);
    Ok(traj)
}
