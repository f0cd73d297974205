use std::f64::consts::{PI, SQRT_2};

use crate::{PhysicalField, SpectralError, SpectralField};

/// Interior points for exact quadratic products: at least `⌈3N/2⌉`, rounded to a power of two.
pub fn quadratic_grid_points(n: usize) -> usize {
    n.saturating_mul(3).div_ceil(2).max(1).next_power_of_two()
}

/// Interior points for exact cubic products: at least `2N`, rounded to a power of two.
pub fn cubic_grid_points(n: usize) -> usize {
    (2 * n).max(1).next_power_of_two()
}

/// Grid used for the `L⁴` and `L∞` norms.
pub fn norm_grid_points(n: usize) -> usize {
    (4 * n).max(256)
}

/// Precomputed basis tables on `M` interior points for `N` modes.
///
/// With `P = M + 1`, the trapezoid rule on this grid integrates `cos(mπx)`
/// exactly for `0 < m < 2P`, so projections of band-limited products are exact.
#[derive(Debug, Clone)]
pub struct SineGrid {
    n: usize,
    m: usize,
    // row j holds e_k(x_j) for k = 1..n
    basis: Vec<f64>,
    // row j holds e_k'(x_j)
    deriv: Vec<f64>,
}

impl SineGrid {
    pub fn new(n_modes: usize, grid_size: usize) -> Result<Self, SpectralError> {
        if n_modes == 0 {
            return Err(SpectralError::Empty);
        }
        if grid_size < n_modes {
            return Err(SpectralError::Resolution { grid: grid_size, modes: n_modes });
        }
        let p = grid_size + 1;
        let mut basis = Vec::with_capacity(grid_size * n_modes);
        let mut deriv = Vec::with_capacity(grid_size * n_modes);
        for j in 1..=grid_size {
            for k in 1..=n_modes {
                // reduce kj modulo 2P before scaling so large products stay accurate
                let r = ((k * j) % (2 * p)) as f64 * PI / p as f64;
                basis.push(SQRT_2 * r.sin());
                deriv.push(SQRT_2 * k as f64 * PI * r.cos());
            }
        }
        Ok(Self { n: n_modes, m: grid_size, basis, deriv })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Quadrature weight `1/(M+1)`.
    pub fn weight(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }

    /// `out_j = Σ_k a_k e_k(x_j)`.
    pub fn synthesize(&self, a: &[f64], out: &mut [f64]) {
        self.apply_table(&self.basis, a, out);
    }

    /// `out_j = Σ_k a_k e_k'(x_j)`.
    pub fn synthesize_derivative(&self, a: &[f64], out: &mut [f64]) {
        self.apply_table(&self.deriv, a, out);
    }

    fn apply_table(&self, table: &[f64], a: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for (row, o) in table.chunks_exact(self.n).zip(out.iter_mut()) {
            *o = row.iter().zip(a).map(|(s, c)| s * c).sum();
        }
    }

    /// Trapezoid projection `a_k = (1/(M+1)) Σ_j v_j e_k(x_j)`.
    pub fn project(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        out.fill(0.0);
        for (row, v) in self.basis.chunks_exact(self.n).zip(values) {
            for (o, s) in out.iter_mut().zip(row) {
                *o += v * s;
            }
        }
        let w = self.weight();
        out.iter_mut().for_each(|o| *o *= w);
    }
}

/// Evaluates the sine expansion on `M` interior points.
pub fn to_physical(u: &SpectralField, grid_size: usize) -> Result<PhysicalField, SpectralError> {
    let g = SineGrid::new(u.n_modes(), grid_size)?;
    let mut v = vec![0.0; grid_size];
    g.synthesize(u.coeffs(), &mut v);
    PhysicalField::new(v)
}

/// Discrete sine projection onto `n_modes` modes.
pub fn to_spectral(v: &PhysicalField, n_modes: usize) -> Result<SpectralField, SpectralError> {
    let g = SineGrid::new(n_modes, v.grid_size())?;
    let mut a = vec![0.0; n_modes];
    g.project(v.values(), &mut a);
    SpectralField::new(a)
}

impl SpectralField {
    /// Samples `f` on a fine grid and projects onto `n` modes.
    pub fn from_function(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        let m = (16 * n).max(1023);
        to_spectral(&PhysicalField::sample(m, f)?, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub l4: f64,
    pub linf: f64,
}

/// Reusable evaluator for the grid-based norms of `n`-mode fields.
#[derive(Debug, Clone)]
pub struct NormEvaluator {
    grid: SineGrid,
    buf: Vec<f64>,
}

impl NormEvaluator {
    pub fn new(n_modes: usize) -> Result<Self, SpectralError> {
        let grid = SineGrid::new(n_modes, norm_grid_points(n_modes))?;
        let buf = vec![0.0; grid.grid_size()];
        Ok(Self { grid, buf })
    }

    pub fn norms(&mut self, u: &SpectralField) -> Norms {
        let u = if u.n_modes() == self.grid.n_modes() { u.clone() } else { u.resized(self.grid.n_modes()) };
        self.grid.synthesize(u.coeffs(), &mut self.buf);
        let w = self.grid.weight();
        let l4 = (w * self.buf.iter().map(|x| x.powi(4)).sum::<f64>()).powf(0.25);
        let linf = self.buf.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Norms { l2: u.l2(), h1: u.h1(), l4, linf }
    }

    pub fn linf(&mut self, u: &SpectralField) -> f64 {
        self.norms(u).linf
    }
}

pub fn norms(u: &SpectralField) -> Norms {
    NormEvaluator::new(u.n_modes())
        .expect("a valid field has at least one mode")
        .norms(u)
}

/// `(u, v)_{L²}`; the shorter field is zero-padded.
pub fn inner_product(u: &SpectralField, v: &SpectralField) -> f64 {
    u.dot(v)
}
