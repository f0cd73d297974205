use std::f64::consts::{PI, SQRT_2};

use bhlab_spectral::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn eval(a: &[f64], x: f64) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, c)| c * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
        .sum()
}

/// Trapezoid over `pts` intervals; endpoints vanish.
fn dense_trapezoid(pts: usize, f: impl Fn(f64) -> f64) -> f64 {
    (1..pts).map(|j| f(j as f64 / pts as f64)).sum::<f64>() / pts as f64
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> SpectralField {
    SpectralField::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn eigenvalues_are_k_squared_pi_squared() {
    assert!((eigenvalue(1).unwrap() - 9.869_604_401_089_358).abs() < 1e-12);
    assert!((eigenvalue(2).unwrap() - 4.0 * PI * PI).abs() < 1e-12);
    assert_eq!(eigenvalue(0), Err(SpectralError::InvalidMode(0)));
    assert_eq!(eigenvalue(-3), Err(SpectralError::InvalidMode(-3)));
}

#[test]
fn single_mode_on_three_points() {
    let e1 = SpectralField::mode(1, 1).unwrap();
    let v = to_physical(&e1, 3).unwrap();
    let want = [SQRT_2 * (PI / 4.0).sin(), SQRT_2, SQRT_2 * (3.0 * PI / 4.0).sin()];
    for (a, b) in v.values().iter().zip(want) {
        assert!((a - b).abs() < 1e-14);
    }
    let z = to_physical(&SpectralField::zeros(4), 8).unwrap();
    assert!(z.values().iter().all(|&x| x == 0.0));
}

#[test]
fn coarse_grid_is_rejected() {
    let u = SpectralField::zeros(8);
    assert!(matches!(to_physical(&u, 7), Err(SpectralError::Resolution { .. })));
}

#[test]
fn round_trip_with_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = random_field(&mut rng, 8);
    let v = to_physical(&u, 32).unwrap();
    for (x, val) in v.points().iter().zip(v.values()) {
        assert!((eval(u.coeffs(), *x) - val).abs() < 1e-12);
    }
    let back = to_spectral(&v, 8).unwrap();
    for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn norms_of_first_mode() {
    let n = norms(&SpectralField::mode(4, 1).unwrap());
    assert!((n.l2 - 1.0).abs() < 1e-15);
    assert!((n.h1 - PI).abs() < 1e-14);
    // ∫ 4 sin⁴(πx) dx = 3/2
    assert!((n.l4 - 1.5_f64.powf(0.25)).abs() < 1e-12);
    assert!((n.linf - SQRT_2).abs() < 1e-3);
}

#[test]
fn l4_matches_dense_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let u = random_field(&mut rng, 16);
        let oracle = dense_trapezoid(2048, |x| eval(u.coeffs(), x).powi(4)).powf(0.25);
        assert!((norms(&u).l4 - oracle).abs() < 1e-8);
    }
}

#[test]
fn inner_product_matches_dense_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_field(&mut rng, 12);
    let v = random_field(&mut rng, 12);
    let oracle = dense_trapezoid(2048, |x| eval(u.coeffs(), x) * eval(v.coeffs(), x));
    assert!((inner_product(&u, &v) - oracle).abs() < 1e-10);
    let e1 = SpectralField::mode(3, 1).unwrap();
    let e2 = SpectralField::mode(3, 2).unwrap();
    let e3 = SpectralField::mode(3, 3).unwrap();
    assert_eq!(inner_product(&e1, &e2), 0.0);
    assert_eq!(inner_product(&e3, &e3), 1.0);
}

#[test]
fn function_projection_recovers_a_sine() {
    let u = SpectralField::from_function(6, |x| 3.0 * (2.0 * PI * x).sin()).unwrap();
    let want = [0.0, 3.0 / SQRT_2, 0.0, 0.0, 0.0, 0.0];
    for (a, b) in u.coeffs().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn field_rejects_non_finite() {
    assert_eq!(SpectralField::new(vec![1.0, f64::NAN]), Err(SpectralError::NonFinite { index: 1 }));
    assert_eq!(SpectralField::new(vec![]), Err(SpectralError::Empty));
    let u = SpectralField::try_from(vec![1.0, 2.0]).unwrap();
    assert_eq!(u.coeffs(), &[1.0, 2.0]);
}

#[test]
fn params_validation() {
    assert!(ModelParams::new(1.0, 1.0, 1.0, 0.5).is_ok());
    assert!(ModelParams::new(0.0, 1.0, 1.0, 0.5).is_err());
    assert!(ModelParams::new(1.0, -1.0, 1.0, 0.5).is_err());
    assert!(ModelParams::new(1.0, 1.0, -0.1, 0.5).is_err());
    assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0).is_err());
    assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0).is_err());
    let p = ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
    assert!((p.reaction_growth() - 1.25).abs() < 1e-15);
    assert!((p.monotonicity_reaction() - 1.75).abs() < 1e-15);
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

proptest! {
    #[test]
    fn poincare(c in (1usize..24).prop_flat_map(coeffs)) {
        let u = SpectralField::new(c).unwrap();
        let tail: f64 = u.coeffs()[1..].iter().map(|a| a * a).sum();
        let gap = u.h1_sq() - PI * PI * u.l2_sq();
        prop_assert!(gap >= -1e-10 * (1.0 + u.h1_sq()));
        if tail == 0.0 {
            prop_assert!(gap.abs() <= 1e-10 * (1.0 + u.h1_sq()));
        } else {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn parseval(c in (1usize..24).prop_flat_map(coeffs)) {
        let u = SpectralField::new(c).unwrap();
        let n = u.n_modes();
        let v = to_physical(&u, 4 * n).unwrap();
        let quad: f64 = v.values().iter().map(|x| x * x).sum::<f64>() / (4 * n + 1) as f64;
        prop_assert!((quad.sqrt() - u.l2()).abs() < 1e-8);
    }

    #[test]
    fn round_trip(c in (1usize..24).prop_flat_map(coeffs)) {
        let u = SpectralField::new(c).unwrap();
        let back = to_spectral(&to_physical(&u, 2 * u.n_modes()).unwrap(), u.n_modes()).unwrap();
        let scale = 1.0 + u.l2();
        for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }
}
