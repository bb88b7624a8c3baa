use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qpc_core::arithmetic::Frequency;
use qpc_core::cocycle::*;
use qpc_core::error::Error;
use qpc_core::localization::centered_energy;
use qpc_core::potential::TrigPolynomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::Arc;

fn golden() -> f64 {
    Frequency::golden().to_f64()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_d2(rng: &mut ChaCha8Rng) -> TrigPolynomial {
    let mut pos = vec![c(rng.gen_range(-1.0..1.0), 0.0)];
    for _ in 0..2 {
        pos.push(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    pos[2] += c(0.5, 0.0);
    TrigPolynomial::from_nonneg(&pos).unwrap()
}

fn amo_energy(lambda: f64, approx: f64) -> f64 {
    centered_energy(&TrigPolynomial::amo(lambda), golden(), 0.2, approx, 1.0, 120).unwrap()
}

#[test]
fn complexified_schrodinger_entry() {
    let v = TrigPolynomial::amo(1.0);
    let s = schrodinger_cocycle(&v, 0.4, golden());
    let m = s.eval(c(0.0, 0.1));
    assert!((m[(0, 0)] - c(0.4 - 2.0 * (TAU * 0.1).cosh(), 0.0)).norm() < 1e-12);
}

#[test]
fn dual_d1_reduction() {
    let lam = 0.7;
    let v = TrigPolynomial::amo(lam);
    let (e, theta) = (0.3, 0.21);
    let l = dual_cocycle(&v, e, golden()).unwrap().eval_real(theta);
    let expect = [[(e - 2.0 * (TAU * theta).cos()) / lam, -1.0], [1.0, 0.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((l[(i, j)] - c(expect[i][j], 0.0)).norm() < 1e-14);
        }
    }
}

#[test]
fn dual_d2_matches_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alpha = golden();
    for _ in 0..5 {
        let v = random_d2(&mut rng);
        let e = rng.gen_range(-2.0..2.0);
        let theta: f64 = rng.gen_range(0.0..1.0);
        let l = dual_cocycle(&v, e, alpha).unwrap().eval_real(theta);
        // State (u(1), u(0), u(−1), u(−2)) ↦ (u(2), u(1), u(0), u(−1)) for the
        // recurrence Σ_k V_k u(n+k) + 2cos2π(θ)u(n) = E u(n) at n = 0.
        for j in 0..4 {
            let mut state = [c(0.0, 0.0); 4];
            state[j] = c(1.0, 0.0);
            let u = |m: i64| state[(1 - m) as usize];
            let mut s = (c(e, 0.0) - v.coeff(0) - c(2.0 * (TAU * theta).cos(), 0.0)) * u(0);
            for k in [-2i64, -1, 1] {
                s -= v.coeff(k) * u(k);
            }
            let u2 = s / v.coeff(2);
            let col = l.column(j);
            assert!((col[0] - u2).norm() < 1e-12);
            for i in 1..4 {
                assert!((col[i] - state[i - 1]).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn dual_det_unimodular_and_symplectic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_d2(&mut rng);
    let cc = dual_cocycle(&v, 0.37, golden()).unwrap();
    for _ in 0..100 {
        let det = cc.eval_real(rng.gen_range(0.0..1.0)).determinant();
        assert!((det.norm() - 1.0).abs() < 1e-10);
    }
    assert_eq!(probe_symplectic(&cc, 4, 20), Some(SymplecticConvention::Adjoint));
}

#[test]
fn transfer_products() {
    let alpha = golden();
    let v = TrigPolynomial::zero();
    let s = schrodinger_cocycle(&v, 3.0, alpha);
    let id = s.transfer_product(c(0.1, 0.0), 0).unwrap();
    assert_eq!(id.log_scale, 0.0);
    let p = s.transfer_product(c(0.1, 0.0), 20).unwrap();
    let norm = p.matrix.singular_values()[0].ln() + p.log_scale;
    assert!((norm / 20.0 - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 0.05);

    let amo = schrodinger_cocycle(&TrigPolynomial::amo(0.8), 0.3, alpha);
    let z = c(0.37, 0.02);
    let a8 = amo.transfer_product(z, 8).unwrap().to_matrix();
    let a3 = amo.transfer_product(z, 3).unwrap().to_matrix();
    let a5 = amo.transfer_product(z + 3.0 * alpha, 5).unwrap().to_matrix();
    assert!((&a5 * &a3 - &a8).norm() <= 1e-8 * a8.norm());
    let back = amo.transfer_product(z + 8.0 * alpha, -8).unwrap().to_matrix();
    assert!((&back * &a8 - DMatrix::identity(2, 2)).norm() < 1e-8);
}

#[test]
fn schrodinger_products_unimodular() {
    let s = schrodinger_cocycle(&TrigPolynomial::amo(0.5), 0.1, golden());
    for n in [10i64, 100, 1000, 10_000] {
        let p = s.transfer_product(c(0.3, 0.0), n).unwrap();
        let det = p.matrix.determinant() * (2.0 * p.log_scale).exp();
        assert!((det - c(1.0, 0.0)).norm() < 1e-8, "n={n} det={det}");
    }
}

#[test]
fn free_elliptic_exponent_zero() {
    let s = schrodinger_cocycle(&TrigPolynomial::zero(), 1.0, golden());
    let l = lyapunov_spectrum(&s, 0.0, 10_000, 16, 0).unwrap();
    assert!(l.exponents[0].abs() < 1e-3);
}

#[test]
fn amo_dual_exponent_is_ln2() {
    let e = amo_energy(0.5, 0.4);
    let cc = dual_cocycle(&TrigPolynomial::amo(0.5), e, golden()).unwrap();
    let l = lyapunov_spectrum(&cc, 0.0, 20_000, 32, 0).unwrap();
    assert!((l.exponents[0] - 2f64.ln()).abs() < 0.01, "{}", l.exponents[0]);
}

#[test]
fn exterior_power_consistency_d2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_d2(&mut rng);
    let cc = dual_cocycle(&v, 0.2, golden()).unwrap();
    let (n, samples) = (2000usize, 16usize);
    let spec = lyapunov_spectrum(&cc, 0.0, n, samples, 0).unwrap();
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
    let wedge2 = |a: &DMatrix<Complex64>| {
        DMatrix::from_fn(6, 6, |r, k| {
            let (i1, i2) = pairs[r];
            let (j1, j2) = pairs[k];
            a[(i1, j1)] * a[(i2, j2)] - a[(i1, j2)] * a[(i2, j1)]
        })
    };
    let mut acc = 0.0;
    for t in 0..samples {
        let x = (t as f64 + spec.theta_offset) / samples as f64;
        let mut m = DMatrix::<Complex64>::identity(6, 6);
        let mut log = 0.0;
        for step in 0..n {
            m = wedge2(&cc.eval_real(x + golden() * step as f64)) * m;
            let s = m.norm();
            m /= c(s, 0.0);
            log += s.ln();
        }
        acc += (m.singular_values().max().ln() + log) / n as f64;
    }
    let direct = acc / samples as f64;
    let tol = 2.0 * spec.stderr[1] + 4.0 / n as f64;
    assert!((direct - spec.l(2)).abs() <= tol, "{direct} vs {} (tol {tol})", spec.l(2));
}

#[test]
fn acceleration_examples() {
    let alpha = golden();
    let p = GridParams { iterations: 4000, samples: 32, seed: 0 };
    let free = schrodinger_cocycle(&TrigPolynomial::zero(), 0.5, alpha);
    assert_eq!(acceleration(&free, 1, &[0.02, 0.04, 0.06], p).unwrap().omega, 0);

    let sup = schrodinger_cocycle(&TrigPolynomial::amo(2.0), amo_energy(2.0, 0.5), alpha);
    let fit = acceleration(&sup, 1, &[0.05, 0.075, 0.1], p).unwrap();
    assert!((fit.omega_raw - 1.0).abs() < 0.05, "{}", fit.omega_raw);
    let l = lyapunov_spectrum(&sup, 0.1, 4000, 32, 0).unwrap();
    assert!((l.l(1) - (2f64.ln() + TAU * 0.1)).abs() < 0.02);

    let sub = schrodinger_cocycle(&TrigPolynomial::amo(0.5), amo_energy(0.5, 0.5), alpha);
    let fit = acceleration(&sub, 1, &[0.01, 0.03, 0.05], p).unwrap();
    assert!(fit.omega_raw.abs() < 0.05, "{}", fit.omega_raw);
}

#[test]
fn subcritical_radius_examples() {
    let alpha = golden();
    let p = GridParams { iterations: 4000, samples: 32, seed: 0 };
    let grid: Vec<f64> = (1..=10).map(|k| 0.02 * k as f64).collect();
    let sub = schrodinger_cocycle(&TrigPolynomial::amo(0.5), amo_energy(0.5, -0.6), alpha);
    let h = subcritical_radius(&sub, &grid, None, p).unwrap();
    assert!((h.h - 2f64.ln() / TAU).abs() < 0.01, "{}", h.h);

    let sup = schrodinger_cocycle(&TrigPolynomial::amo(2.0), amo_energy(2.0, 0.5), alpha);
    assert!(matches!(subcritical_radius(&sup, &grid, None, p), Err(Error::NotSubcritical { .. })));

    let free = schrodinger_cocycle(&TrigPolynomial::zero(), 1.0, alpha);
    let h = subcritical_radius(&free, &grid, Some(0.15), p).unwrap();
    assert!(h.capped);
    assert!(h.h <= 0.15 && h.h >= 0.14);
}

#[test]
fn convexity_in_epsilon() {
    let alpha = golden();
    let s = schrodinger_cocycle(&TrigPolynomial::amo(0.5), amo_energy(0.5, 0.2), alpha);
    let eps: Vec<f64> = (0..8).map(|k| 0.03 * k as f64).collect();
    let specs: Vec<LyapunovSpectrum> = eps.iter().map(|&e| lyapunov_spectrum(&s, e, 4000, 32, 0).unwrap()).collect();
    for w in specs.windows(3) {
        let (a, b, cc) = (w[0].l(1), w[1].l(1), w[2].l(1));
        let tol = 3.0 * (w[0].stderr[0] + w[1].stderr[0] + w[2].stderr[0]) + 1e-3;
        assert!(a + cc - 2.0 * b >= -tol, "convexity");
        assert!(b >= a - tol && cc >= b - tol, "monotone");
    }
}

#[test]
fn rotation_number_examples() {
    let alpha = golden();
    let e = 2.0 * (TAU * 0.3).cos();
    let r = rotation_number(&schrodinger_cocycle(&TrigPolynomial::zero(), e, alpha), 100_000, 0.0).unwrap();
    assert!((r.rho - 0.3).abs() < 1e-3);
    let r = rotation_number(&schrodinger_cocycle(&TrigPolynomial::zero(), 5.0, alpha), 10_000, 0.0).unwrap();
    assert_eq!(r.rho, 0.0);

    let v = TrigPolynomial::amo(0.5);
    let mut prev = f64::INFINITY;
    for k in 0..50 {
        let e = -3.0 + 6.0 * k as f64 / 49.0;
        let rho = rotation_number(&schrodinger_cocycle(&v, e, alpha), 20_000, 0.0).unwrap().rho;
        assert!(rho <= prev);
        prev = rho;
    }
}

fn rot(t: f64) -> DMatrix<Complex64> {
    let (s, co) = (TAU * t).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

#[test]
fn degree_one_conjugacy_shifts_rotation() {
    let alpha = golden();
    let rho = 0.2;
    // B(x) = R_{x/2}: B(x+α)^{-1} R_ρ B(x) = R_{ρ−α/2}.
    let map: MatrixMap = Arc::new(move |z: Complex64| {
        let x = z.re;
        rot(-(x + alpha) / 2.0) * rot(rho) * rot(x / 2.0)
    });
    let conj = generic_cocycle(alpha, 2, map);
    let r = rotation_number(&conj, 10_000, 0.0).unwrap().rho;
    let expect = (rho - alpha / 2.0).rem_euclid(1.0);
    assert!((r - expect).abs() < 1e-3, "{r} vs {expect}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn product_identity(m in 1i64..20, n in 1i64..20, x in 0.0f64..1.0, y in -0.1f64..0.1, e in -3.0f64..3.0) {
        let s = schrodinger_cocycle(&TrigPolynomial::amo(0.9), e, golden());
        let z = c(x, y);
        let amn = s.transfer_product(z, m + n).unwrap().to_matrix();
        let am = s.transfer_product(z, m).unwrap().to_matrix();
        let an = s.transfer_product(z + golden() * m as f64, n).unwrap().to_matrix();
        prop_assert!((&an * &am - &amn).norm() <= 1e-8 * amn.norm());
    }
}
