use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qpc_core::arithmetic::Frequency;
use qpc_core::cocycle::schrodinger_cocycle;
use qpc_core::operators::*;
use qpc_core::potential::TrigPolynomial;
use qpc_core::reducibility::AnalyticTorusFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn golden() -> f64 {
    Frequency::golden().to_f64()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_v(rng: &mut ChaCha8Rng, d: usize) -> TrigPolynomial {
    let mut pos = vec![c(rng.gen_range(-1.0..1.0), 0.0)];
    for _ in 0..d {
        pos.push(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    pos[d] += c(0.5, 0.0);
    TrigPolynomial::from_nonneg(&pos).unwrap()
}

/// L − E on [x1, x2] assembled entry by entry from the operator formula.
fn dense_section(v: &TrigPolynomial, alpha: f64, theta: Complex64, e: f64, x1: i64, x2: i64) -> DMatrix<Complex64> {
    let n = (x2 - x1 + 1) as usize;
    let d = v.degree() as i64;
    DMatrix::from_fn(n, n, |i, j| {
        let (gi, gj) = (x1 + i as i64, x1 + j as i64);
        let k = gj - gi;
        let mut x = if k.abs() <= d { v.coeff(k) } else { c(0.0, 0.0) };
        if k == 0 {
            let z = theta + alpha * gi as f64;
            x += (z * c(0.0, TAU)).exp() + (z * c(0.0, -TAU)).exp() - e;
        }
        x
    })
}

#[test]
fn truncation_matches_dense_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_v(&mut rng, 2);
    let th = c(0.23, 0.0);
    let op = truncate(&v, golden(), th, 0, 9).unwrap().to_dense();
    let dense = dense_section(&v, golden(), th, 0.0, 0, 9);
    assert!((op - dense).norm() < 1e-14);
    assert!(truncate(&v, golden(), th, 0, 9).unwrap().self_adjoint_defect() < 1e-12);
}

#[test]
fn schrodinger_transfer_matrix_entries_are_determinants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alpha = golden();
    for _ in 0..20 {
        let v = random_v(&mut rng, 2);
        let e = rng.gen_range(-3.0..3.0);
        let th = c(rng.gen_range(0.0..1.0), 0.0);
        let s = schrodinger_cocycle(&v, e, alpha);
        for k in 1..=12i64 {
            let a = s.transfer_product(th, k).unwrap().to_matrix();
            let p = |m: i64, z: Complex64| det_schrodinger(&v, alpha, z, e, m);
            let want = [p(k, th), -p(k - 1, th + alpha), p(k - 1, th), -p(k - 2, th + alpha)];
            let got = [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]];
            let scale = a.norm().max(1.0);
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).norm() <= 1e-8 * scale);
            }
        }
    }
}

#[test]
fn det_p_matches_dense_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = TrigPolynomial::amo(0.5);
    for _ in 0..100 {
        let th = c(rng.gen_range(0.0..1.0), rng.gen_range(-0.05..0.05));
        let e = rng.gen_range(-3.0..3.0);
        let p = det_p(&v, golden(), th, e, 50).to_complex();
        let d = dense_section(&v, golden(), th, e, 0, 49).determinant();
        assert!((p - d).norm() <= 1e-8 * d.norm());
    }
}

#[test]
fn cramer_identity_d2() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = random_v(&mut rng, 2);
    let th = c(0.4, 0.0);
    let e = 0.123;
    let pairs: Vec<(i64, i64)> = (0..24).flat_map(|x| [(x, 0), (x, 23), (x, 11)]).collect();
    let t = greens(&v, golden(), th, e, 0, 23, &pairs).unwrap();
    assert!(t.cramer_max_rel_err < 1e-8);
    let inv = dense_section(&v, golden(), th, e, 0, 23).try_inverse().unwrap();
    for g in &t.entries {
        let want = inv[(g.x as usize, g.y as usize)];
        assert!((g.value - want).norm() <= 1e-8 * inv.norm());
    }
}

#[test]
fn boundary_expansion_reconstructs_eigenvector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_v(&mut rng, 2);
    let th = c(0.17, 0.0);
    let big = dense_section(&v, golden(), th, 0.0, -40, 40);
    let eig = big.symmetric_eigen();
    let k = eig.eigenvalues.len() / 2;
    let e = eig.eigenvalues[k];
    let col = eig.eigenvectors.column(k).into_owned();
    let u = |m: i64| if (-40..=40).contains(&m) { col[(m + 40) as usize] } else { c(0.0, 0.0) };
    let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for x in [-8i64, 0, 5] {
        let r = boundary_expansion(&v, golden(), th, e, -10, 10, x, &u).unwrap();
        assert!((r - u(x)).norm() <= 1e-8 * scale, "x={x}");
    }
}

#[test]
fn near_singular_section_rejected() {
    let v = TrigPolynomial::amo(0.5);
    let th = c(0.3, 0.0);
    let eig = dense_section(&v, golden(), th, 0.0, 0, 9).symmetric_eigen();
    let e = eig.eigenvalues[3];
    assert!(matches!(greens(&v, golden(), th, e, 0, 9, &[(0, 0)]), Err(qpc_core::Error::NearSingular { .. })));
}

#[test]
fn spectrum_samples() {
    let alpha = golden();
    let s = spectrum_sample(&TrigPolynomial::amo(1.0), alpha, 400, 4, Side::Schrodinger, false).unwrap();
    assert!(s.eigenvalues.iter().all(|x| x.abs() <= 4.0));
    // Critical AMO: consecutive eigenvalues cluster, most gaps are tiny.
    let gaps: Vec<f64> = s.eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
    let big = gaps.iter().filter(|&&g| g > 0.05).count();
    assert!(big < 40);
    let d = duality_distance(&TrigPolynomial::amo(0.5), alpha, 500, 4).unwrap();
    assert!(d <= 0.1, "{d}");
}

#[test]
fn averaged_log_det_examples() {
    let alpha = golden();
    let v = TrigPolynomial::amo(0.5);
    let e = qpc_core::localization::centered_energy(&v, alpha, 0.2, 0.3, 1.0, 120).unwrap();
    let a0 = avg_log_det(&v, alpha, e, 200, 0.0, 128).unwrap();
    assert!(a0 >= -0.05, "{a0}");
    let a2 = avg_log_det(&v, alpha, e, 200, 0.02, 128).unwrap();
    assert!(a2 - a0 <= TAU * 0.02 + 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn det_p_is_trig_polynomial_of_degree_n(n in 2usize..12, e in -2.0f64..2.0, lam in 0.2f64..2.0) {
        let v = TrigPolynomial::amo(lam);
        let m = 64;
        let f = AnalyticTorusFunction::from_fn(|x| det_p(&v, golden(), c(x, 0.0), e, n).to_complex(), m, false);
        let total: f64 = f.coeffs.iter().map(|z| z.norm()).sum();
        let tail: f64 = f.iter().filter(|(j, _)| j.abs() > n as i64).map(|(_, z)| z.norm()).sum();
        prop_assert!(tail <= 1e-8 * total);
    }

    #[test]
    fn real_phase_sections_self_adjoint(th in 0.0f64..1.0, x1 in -50i64..50, len in 1i64..40) {
        let v = TrigPolynomial::from_nonneg(&[c(0.2, 0.0), c(0.3, 0.4), c(-0.5, 0.1)]).unwrap();
        let op = truncate(&v, golden(), c(th, 0.0), x1, x1 + len).unwrap();
        let norm = op.to_dense().norm();
        prop_assert!(op.self_adjoint_defect() <= 1e-12 * norm);
    }
}
