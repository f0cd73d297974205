//! Drift operators of `du + F(u) dt = σ dW` with `F = νA + αB − βc`,
//! `B(u) = u ∂ₓu` and `c(u) = u(1−u)(u−γ)`.
//!
//! `u ∂ₓu` and `u³` tested against `e_k` are cosine series, so the trapezoid
//! projection from a fine enough grid is exact. `u² e_k` is a sine series,
//! which the trapezoid rule does not integrate exactly; the quadratic part of
//! `c` is therefore projected with the closed-form triple-product tensor.

use bhlab_spectral::{
    cubic_grid_points, lambda, quadratic_grid_points, ModelParams, NormEvaluator, SineGrid,
    SpectralError, SpectralField,
};

/// Default embedding constant in `‖u‖_{L∞} ≤ C ‖u‖_{H¹₀}` on (0,1).
pub const DEFAULT_EMBEDDING_CONSTANT: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct DriftEvaluation {
    pub a_part: SpectralField,
    pub b_part: SpectralField,
    pub c_part: SpectralField,
    pub f_total: SpectralField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Scratch buffers for [`Operators::nonlinear_drift`].
#[derive(Debug, Clone)]
pub struct Workspace {
    u: Vec<f64>,
    ux: Vec<f64>,
}

/// Transform tables for one mode count.
#[derive(Debug, Clone)]
pub struct Operators {
    n: usize,
    quad: SineGrid,
    cubic: SineGrid,
    // t[(k*n + i)*n + j] = (e_i e_j, e_k)
    triple: Vec<f64>,
}

impl Operators {
    pub fn new(n_modes: usize) -> Result<Self, SpectralError> {
        Self::with_grids(n_modes, quadratic_grid_points(n_modes), cubic_grid_points(n_modes))
    }

    /// Custom grid sizes; both must resolve their products exactly.
    pub fn with_grids(n_modes: usize, quadratic: usize, cubic: usize) -> Result<Self, SpectralError> {
        if 2 * (quadratic + 1) <= 3 * n_modes {
            return Err(SpectralError::Resolution { grid: quadratic, modes: n_modes });
        }
        if 2 * (cubic + 1) <= 4 * n_modes {
            return Err(SpectralError::Resolution { grid: cubic, modes: n_modes });
        }
        Ok(Self {
            n: n_modes,
            quad: SineGrid::new(n_modes, quadratic)?,
            cubic: SineGrid::new(n_modes, cubic)?,
            triple: triple_products(n_modes),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn workspace(&self) -> Workspace {
        let m = self.cubic.grid_size().max(self.quad.grid_size());
        Workspace { u: vec![0.0; m], ux: vec![0.0; m] }
    }

    fn fit(&self, u: &SpectralField) -> SpectralField {
        if u.n_modes() == self.n { u.clone() } else { u.resized(self.n) }
    }

    pub fn apply_a(&self, u: &SpectralField) -> SpectralField {
        apply_a(&self.fit(u))
    }

    /// Projection of `u ∂ₓu` onto the retained modes.
    pub fn apply_b(&self, u: &SpectralField) -> SpectralField {
        let u = self.fit(u);
        let m = self.quad.grid_size();
        let mut v = vec![0.0; m];
        let mut vx = vec![0.0; m];
        self.quad.synthesize(u.coeffs(), &mut v);
        self.quad.synthesize_derivative(u.coeffs(), &mut vx);
        for (a, b) in v.iter_mut().zip(&vx) {
            *a *= b;
        }
        let mut out = vec![0.0; self.n];
        self.quad.project(&v, &mut out);
        field(out)
    }

    /// Projection of `u(1−u)(u−γ)` onto the retained modes.
    pub fn apply_c(&self, u: &SpectralField, gamma: f64) -> SpectralField {
        let u = self.fit(u);
        let mut v = vec![0.0; self.cubic.grid_size()];
        self.cubic.synthesize(u.coeffs(), &mut v);
        for x in v.iter_mut() {
            *x = -(*x * *x * *x);
        }
        let mut out = vec![0.0; self.n];
        self.cubic.project(&v, &mut out);
        self.add_square_terms(u.coeffs(), 1.0, gamma, &mut out);
        field(out)
    }

    pub fn apply_f(&self, u: &SpectralField, p: &ModelParams) -> DriftEvaluation {
        let a_part = self.apply_a(u);
        let b_part = self.apply_b(u);
        let c_part = self.apply_c(u, p.gamma);
        let f_total = field(
            a_part
                .coeffs()
                .iter()
                .zip(b_part.coeffs())
                .zip(c_part.coeffs())
                .map(|((a, b), c)| p.nu * a + p.alpha * b - p.beta * c)
                .collect(),
        );
        DriftEvaluation { a_part, b_part, c_part, f_total }
    }

    /// Writes `−αB(u) + βc(u)` into `out` and returns `‖u‖⁴_{L⁴}`.
    ///
    /// Both products share the cubic grid, which resolves the quadratic one as
    /// well; the quartic norm is exact on that grid too.
    pub fn nonlinear_drift(&self, a: &[f64], p: &ModelParams, out: &mut [f64], ws: &mut Workspace) -> f64 {
        let m = self.cubic.grid_size();
        let (u, ux) = (&mut ws.u[..m], &mut ws.ux[..m]);
        self.cubic.synthesize(a, u);
        let l4 = self.cubic.weight() * u.iter().map(|x| (x * x) * (x * x)).sum::<f64>();
        if p.alpha == 0.0 && p.beta == 0.0 {
            out.fill(0.0);
            return l4;
        }
        if p.alpha != 0.0 {
            self.cubic.synthesize_derivative(a, ux);
        } else {
            ux.fill(0.0);
        }
        for (x, dx) in u.iter().zip(ux.iter_mut()) {
            *dx = -p.alpha * x * *dx - p.beta * x * x * x;
        }
        self.cubic.project(ux, out);
        if p.beta != 0.0 {
            self.add_square_terms(a, p.beta, p.gamma, out);
        }
        l4
    }

    /// `out += s·((1+γ) P(u²) − γu)`.
    fn add_square_terms(&self, a: &[f64], s: f64, gamma: f64, out: &mut [f64]) {
        let n = self.n;
        for (k, o) in out.iter_mut().enumerate() {
            let block = &self.triple[k * n * n..(k + 1) * n * n];
            let mut q = 0.0;
            for (row, ai) in block.chunks_exact(n).zip(a) {
                q += ai * row.iter().zip(a).map(|(t, aj)| t * aj).sum::<f64>();
            }
            *o += s * ((1.0 + gamma) * q - gamma * a[k]);
        }
    }

    /// `‖u‖⁴_{L⁴}` by exact quadrature on the cubic grid.
    pub fn l4_pow4(&self, a: &[f64], ws: &mut Workspace) -> f64 {
        let m = self.cubic.grid_size();
        let u = &mut ws.u[..m];
        self.cubic.synthesize(a, u);
        self.cubic.weight() * u.iter().map(|x| (x * x) * (x * x)).sum::<f64>()
    }

    /// Local monotonicity of `F` on the `L∞` ball containing `v`.
    pub fn monotonicity_gap(&self, u: &SpectralField, v: &SpectralField, p: &ModelParams) -> MonotonicityGap {
        let (u, v) = (self.fit(u), self.fit(v));
        let w = u.sub(&v);
        let r = NormEvaluator::new(self.n).expect("n ≥ 1").linf(&v);
        let fu = self.apply_f(&u, p).f_total;
        let fv = self.apply_f(&v, p).f_total;
        let pairing = fu.sub(&fv).dot(&w);
        let shift = p.alpha * p.alpha * r * r / (2.0 * p.nu) + p.monotonicity_reaction();
        let lhs = pairing + shift * w.l2_sq();
        let rhs = 0.5 * p.nu * w.h1_sq();
        MonotonicityGap { lhs, rhs, gap: lhs - rhs }
    }

    /// `⟨F(u+λy) − F(u), w⟩` for each `λ`.
    pub fn hemicontinuity_probe(
        &self,
        u: &SpectralField,
        w: &SpectralField,
        y: &SpectralField,
        p: &ModelParams,
        lambdas: &[f64],
    ) -> Vec<f64> {
        let (u, w, y) = (self.fit(u), self.fit(w), self.fit(y));
        let fu = self.apply_f(&u, p).f_total;
        lambdas
            .iter()
            .map(|&l| self.apply_f(&u.axpy(l, &y), p).f_total.sub(&fu).dot(&w))
            .collect()
    }
}

/// Pointwise reaction `x(1−x)(x−γ)`.
#[inline]
pub fn reaction(x: f64, gamma: f64) -> f64 {
    x * (1.0 - x) * (x - gamma)
}

/// `(e_i e_j, e_k)` from `sin A sin B sin C = ¼[sin(A+B−C) + sin(B+C−A) + sin(C+A−B) − sin(A+B+C)]`.
fn triple_products(n: usize) -> Vec<f64> {
    // ∫₀¹ sin(mπx) dx
    let s = |m: i64| -> f64 {
        if m % 2 == 0 { 0.0 } else { 2.0 / (m as f64 * std::f64::consts::PI) }
    };
    let scale = 2.0 * std::f64::consts::SQRT_2 / 4.0;
    let mut t = Vec::with_capacity(n * n * n);
    for k in 1..=n as i64 {
        for i in 1..=n as i64 {
            for j in 1..=n as i64 {
                t.push(scale * (s(i + j - k) + s(j + k - i) + s(k + i - j) - s(i + j + k)));
            }
        }
    }
    t
}

fn field(c: Vec<f64>) -> SpectralField {
    SpectralField::new(c).expect("operator output is finite for finite input")
}

fn ops_for(u: &SpectralField) -> Operators {
    Operators::new(u.n_modes()).expect("a valid field has at least one mode")
}

/// `(Au)_k = λ_k a_k`.
pub fn apply_a(u: &SpectralField) -> SpectralField {
    field(u.coeffs().iter().enumerate().map(|(i, a)| lambda(i + 1) * a).collect())
}

pub fn apply_b(u: &SpectralField) -> SpectralField {
    ops_for(u).apply_b(u)
}

pub fn apply_c(u: &SpectralField, gamma: f64) -> SpectralField {
    ops_for(u).apply_c(u, gamma)
}

pub fn apply_f(u: &SpectralField, p: &ModelParams) -> DriftEvaluation {
    ops_for(u).apply_f(u, p)
}

pub fn monotonicity_gap(u: &SpectralField, v: &SpectralField, p: &ModelParams) -> MonotonicityGap {
    ops_for(u).monotonicity_gap(u, v, p)
}

pub fn hemicontinuity_probe(
    u: &SpectralField,
    w: &SpectralField,
    y: &SpectralField,
    p: &ModelParams,
    lambdas: &[f64],
) -> Vec<f64> {
    ops_for(u).hemicontinuity_probe(u, w, y, p, lambdas)
}
