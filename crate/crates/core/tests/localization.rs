use num_complex::Complex64;
use qpc_core::arithmetic::{resonances, Frequency};
use qpc_core::localization::*;
use qpc_core::TrigPolynomial;

fn golden() -> f64 {
    Frequency::golden().to_f64()
}

fn benchmark(sites: usize, theta: f64) -> LocalizationReport {
    let v = TrigPolynomial::amo(0.5);
    let e = centered_energy(&v, golden(), theta, 0.6, 0.5, 80).unwrap();
    let pair = eigenpair_near(&v, golden(), theta, e, sites).unwrap();
    let res = resonances(pair.theta, golden(), 0.5, sites as u64).unwrap();
    decay_report(&pair, &res, 4.0, 0.5).unwrap()
}

#[test]
fn amo_dual_decay_rate() {
    let ln2 = 2f64.ln();
    let mut rates = Vec::new();
    for sites in [1000, 2000, 4000] {
        let rep = benchmark(sites, 0.1234);
        assert!(rep.residual <= 1e-10, "{}", rep.residual);
        let r = rep.masked_decay_rate.unwrap();
        eprintln!("sites {sites} rate {r} stderr {:?} pts {} shift {}", rep.rate_stderr, rep.fit_points, rep.shift);
        assert!((r - ln2).abs() <= 0.1 * ln2, "rate {r}");
        rates.push(r);
    }
    for w in rates.windows(2) {
        assert!(w[1] >= w[0] * 0.98, "{rates:?}");
    }
}

#[test]
fn resonant_phase_masked_fit() {
    let alpha = golden();
    let rep = benchmark(2000, alpha / 2.0);
    eprintln!("shift {} theta {} windows {:?}", rep.shift, rep.theta, rep.windows);
    let r = rep.masked_decay_rate.unwrap();
    assert!((r - 2f64.ln()).abs() <= 0.1 * 2f64.ln(), "rate {r}");
}

#[test]
fn normalization_invariants() {
    let rep = benchmark(1000, 0.3);
    let i0 = (0 - rep.lo) as usize;
    assert!((rep.u[i0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    for (k, la) in rep.log_abs.iter().enumerate() {
        let j = rep.lo + k as i64;
        assert!(*la <= (1.0 + j.abs() as f64).ln() + 1e-12);
    }
}

#[test]
fn dominated_diagonal_is_coordinate_vector() {
    // Large cosine relative to the hopping: L = 1e-4·Δ + 2cos.
    let v = TrigPolynomial::amo(1e-4);
    let theta = 0.21;
    let e = 2.0 * (std::f64::consts::TAU * theta).cos();
    let pair = eigenpair_near(&v, golden(), theta, e, 500).unwrap();
    assert_eq!(pair.shift, 0);
    for j in pair.lo..=pair.hi {
        if j != 0 {
            assert!(pair.u_at(j).norm() < 1e-3);
        }
    }
}

#[test]
fn translation_covariance() {
    let v = TrigPolynomial::amo(0.5);
    let a = golden();
    let theta = 0.1234;
    let e = centered_energy(&v, a, theta, 0.6, 0.5, 80).unwrap();
    let p1 = eigenpair_near(&v, a, theta, e, 1000).unwrap();
    let p2 = eigenpair_near(&v, a, theta + a, e, 1000).unwrap();
    assert_eq!(p1.shift, p2.shift + 1);
    for j in -300..=300 {
        assert!((p1.u_at(j) - p2.u_at(j)).norm() <= 1e-6);
    }
}

#[test]
fn far_target_rejected() {
    let v = TrigPolynomial::amo(0.5);
    let e = eigenpair_near(&v, golden(), 0.1, 50.0, 600);
    assert!(matches!(e, Err(qpc_core::Error::NoEigenvalueWithin { .. })));
}

#[test]
fn regularity_amo_dual() {
    let v = TrigPolynomial::amo(0.5);
    let a = golden();
    let theta = 0.1234;
    let e = centered_energy(&v, a, theta, 0.6, 0.5, 80).unwrap();
    let g = 2f64.ln();
    let r = regularity_check(&v, a, theta, e, 200, 60, 0.8 * g).unwrap();
    assert!(r.regular, "{r:?}");
    let r = regularity_check(&v, a, theta, e, 200, 60, 2.0 * g).unwrap();
    assert!(!r.regular, "{r:?}");
}

#[test]
fn regularity_outside_spectrum() {
    // V_0-dominated potential, energy far from the spectrum.
    let v = TrigPolynomial::amo(0.1);
    let r = regularity_check(&v, golden(), 0.3, 10.0, 0, 70, 1.0).unwrap();
    assert!(r.regular);
    assert!(r.witness.unwrap().margin > 5.0);
}

mod props {
    use super::*;
    use proptest::prelude::*;
    use qpc_core::arithmetic::ResonanceSet;

    fn synthetic(rate: f64, sites: usize) -> Eigenpair {
        let lo = -(sites as i64);
        let log_abs: Vec<f64> = (lo..=sites as i64).map(|j| -rate * j.abs() as f64).collect();
        Eigenpair {
            energy: 0.0,
            theta_input: 0.0,
            theta: 0.0,
            sites,
            shift: 0,
            lo,
            hi: sites as i64,
            u: log_abs.iter().map(|l| Complex64::new(l.exp(), 0.0)).collect(),
            log_abs,
            residual: 0.0,
            distance: 0.0,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn windows_exclude_resonances(theta in 0.0..1.0f64, eps0 in 0.05..1.0f64, c0 in 1.0..8.0f64, eta in 0.0..0.9f64) {
            let res = resonances(theta, golden(), eps0, 2000).unwrap();
            let ws = mask_windows(&res, c0, eta);
            for w in &ws {
                prop_assert!(!w.contains(0));
                for r in &res.resonances {
                    prop_assert!(!w.contains(r.n), "window {:?} contains resonance {}", w, r.n);
                }
            }
            for pair in ws.windows(2) {
                prop_assert!(pair[0].upper.unwrap() <= pair[1].lower + 1e-12);
            }
        }

        #[test]
        fn exponential_profile_rate_recovered(rate in 0.1..2.0f64) {
            let pair = synthetic(rate, 400);
            let res = ResonanceSet { theta: 0.0, eps0: 0.5, horizon: 400, resonances: Vec::new() };
            let rep = decay_report(&pair, &res, 4.0, 0.5).unwrap();
            prop_assert!((rep.masked_decay_rate.unwrap() - rate).abs() < 1e-8 * rate);
        }
    }
}
