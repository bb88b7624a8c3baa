use nalgebra::DMatrix;
use num_complex::Complex64;
use qpc_core::arithmetic::Frequency;
use qpc_core::wedge::*;
use qpc_core::TrigPolynomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn two_mode() -> TrigPolynomial {
    TrigPolynomial::from_nonneg(&[c(0.3, 0.0), c(0.4, 0.1), c(0.7, -0.2)]).unwrap()
}

#[test]
fn ratio_constant_d1() {
    let v = TrigPolynomial::amo(0.5);
    let alpha = Frequency::golden().to_f64();
    let r = th1_ratio_check(&v, alpha, &[-0.7, 0.1, 0.9, 1.3, 2.2], &[0.1, 0.37, 0.8], &[4, 6, 8], &[0], &[-1])
        .unwrap();
    assert!(r.max_rel_spread <= 1e-6, "{r:?}");
    assert!((r.empirical_c.norm() - 1.0).abs() < 1e-6);
}

#[test]
fn ratio_constant_d2_all_minors() {
    let v = two_mode();
    let alpha = Frequency::golden().to_f64();
    let labels = [-2i64, -1, 0, 1];
    for rows in [vec![-2i64, 1], vec![-1, 0], vec![0]] {
        for cols in [vec![-2i64, -1], vec![0, 1], vec![1]] {
            if rows.len() != cols.len() {
                continue;
            }
            assert!(labels.contains(&rows[0]));
            let r = th1_ratio_check(&v, alpha, &[-1.1, 0.2, 0.6, 1.5, 2.4], &[0.05, 0.5, 0.71], &[4, 6, 8], &rows, &cols)
                .unwrap();
            assert!(r.max_rel_spread <= 1e-6, "rows {rows:?} cols {cols:?}: {}", r.max_rel_spread);
        }
    }
}

#[test]
fn zero_sets_agree() {
    let v = two_mode();
    let alpha = Frequency::golden().to_f64();
    let req = WedgeMinorRequest { rows: vec![-1, 0], cols: vec![-2, 1], k: 6 };
    let rep = zero_set_check(&v, alpha, 0.3, &req).unwrap();
    assert!(rep.hausdorff < 1e-6, "{rep:?}");
}

#[test]
fn out_of_band_columns_rejected() {
    let v = two_mode();
    let e = general_truncated_det(&v, 0.3, c(0.1, 0.0), 0.0, &[0, 1, 2], &[0, 1, 7]);
    assert!(matches!(e, Err(qpc_core::Error::IndexOutOfRange { .. })));
}

fn random_blocks(rng: &mut ChaCha8Rng, d: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let b0 = DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let b = (&b0 + b0.adjoint()) * c(0.5, 0.0);
    (a, b)
}

#[test]
fn block_minor_inequality_and_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (d, k, k0) = (2, 20, 5);
    for _ in 0..10 {
        let (a, b) = random_blocks(&mut rng, d);
        let m = block_tridiagonal(&a, &b, k);
        let i = k0 * d + 1 + rng.gen_range(0..d);
        let j = (k - 1) * d + 1 + rng.gen_range(0..d);
        let rep = block_minor_expansion(&m, d, k, i, j, k0).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(structural_zero_max(&m, d, k, i, j, k0) <= 1e-12);
    }
}

#[test]
fn numerator_bound_amo() {
    // Coupling 1/2: L = (Δ + 4cos)/2, so γ_1 = ln 2 and ln|V_1| = −ln 2.
    let v = TrigPolynomial::amo(0.5);
    let alpha = Frequency::golden().to_f64();
    let ys: Vec<i64> = (5..55).step_by(5).collect();
    let rep = numerator_bound_check(&v, alpha, 0.17, 0.3, 0, 60, 0, &ys, 0.05, &[2f64.ln()]).unwrap();
    assert!(rep.min_margin > 0.0, "{rep:?}");
    assert!(rep.green_decay_rate > 0.5, "{}", rep.green_decay_rate);
}

mod props {
    use super::*;
    use proptest::prelude::*;
    use qpc_core::operators::det_p;
    use rand::Rng;

    fn potential() -> impl Strategy<Value = TrigPolynomial> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=3).prop_map(|cs| {
            let mut pos = vec![c(cs[0].0, 0.0)];
            pos.extend(cs.iter().map(|&(a, b)| c(a, b)));
            let d = pos.len() - 1;
            pos[d] += c(0.5, 0.0);
            TrigPolynomial::from_nonneg(&pos).unwrap()
        })
    }

    fn block(d: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d)
            .prop_map(move |v| DMatrix::from_iterator(d, d, v.into_iter().map(|(a, b)| c(a, b))))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn square_truncation_is_section_determinant(v in potential(), th in 0.0..1.0f64, e in -3.0..3.0f64, k in 1usize..12) {
            let alpha = Frequency::golden().to_f64();
            let rows: Vec<i64> = (0..k as i64).collect();
            let full = general_truncated_det(&v, alpha, c(th, 0.0), e, &rows, &rows).unwrap();
            let pk = det_p(&v, alpha, c(th, 0.0), e, k);
            prop_assert!((full.log_abs - pk.log_abs).abs() < 1e-9);
            prop_assert!(qpc_core::numeric::wrap_phase(full.phase - pk.phase).abs() < 1e-9);
        }

        #[test]
        fn ratio_constant_for_random_potentials(v in potential(), seed in 0u64..1000) {
            let alpha = Frequency::golden().to_f64();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let es: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ths: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let r = th1_ratio_check(&v, alpha, &es, &ths, &[6, 8, 10], &[0], &[-1]).unwrap();
            prop_assert!(r.max_rel_spread <= 1e-6, "spread {}", r.max_rel_spread);
        }

        #[test]
        fn block_minor_inequality(
            (d, a, b0) in (1usize..=2).prop_flat_map(|d| (Just(d), block(d), block(d))),
            k0 in 2usize..5, extra in 3usize..7, pick in 0usize..4,
        ) {
            let k = k0 + extra;
            let b = (&b0 + b0.adjoint()) * c(0.5, 0.0);
            let m = block_tridiagonal(&a, &b, k);
            let i = k0 * d + 1 + pick % d;
            let j = (k - 1) * d + 1 + (pick / 2) % d;
            let r = block_minor_expansion(&m, d, k, i, j, k0).unwrap();
            prop_assert!(r.lhs <= r.rhs * (1.0 + 1e-10) + 1e-300, "{} > {}", r.lhs, r.rhs);
            prop_assert!(structural_zero_max(&m, d, k, i, j, k0) <= 1e-12);
        }
    }
}
