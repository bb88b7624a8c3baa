//! Small numeric helpers shared across modules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TAU: f64 = 2.0 * PI;

/// A complex number stored as `exp(log_abs) * exp(i*phase)`.
///
/// Determinants of long sections overflow f64 quickly; this keeps them finite.
/// An exact zero has `log_abs = -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: f64,
}

impl LogDet {
    pub const ONE: LogDet = LogDet { log_abs: 0.0, phase: 0.0 };
    pub const ZERO: LogDet = LogDet { log_abs: f64::NEG_INFINITY, phase: 0.0 };

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            return Self::ZERO;
        }
        LogDet { log_abs: z.norm().ln(), phase: z.arg() }
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }

    /// The value as an ordinary complex number (may overflow or underflow).
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }

    pub fn mul(&self, other: &LogDet) -> LogDet {
        LogDet { log_abs: self.log_abs + other.log_abs, phase: wrap_phase(self.phase + other.phase) }
    }

    pub fn div(&self, other: &LogDet) -> LogDet {
        LogDet { log_abs: self.log_abs - other.log_abs, phase: wrap_phase(self.phase - other.phase) }
    }

    pub fn scale_log(&self, s: f64) -> LogDet {
        LogDet { log_abs: self.log_abs + s, phase: self.phase }
    }

    pub fn neg(&self) -> LogDet {
        LogDet { log_abs: self.log_abs, phase: wrap_phase(self.phase + PI) }
    }
}

/// Phase reduced to (-π, π].
pub fn wrap_phase(p: f64) -> f64 {
    let mut q = p.rem_euclid(TAU);
    if q > PI {
        q -= TAU;
    }
    q
}

/// Distance to the nearest integer, ‖x‖_{R/Z}.
pub fn dist_z(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Fractional part in [0, 1).
pub fn frac(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

/// `2cos(2πz)` for complex z.
pub fn two_cos(z: Complex64) -> Complex64 {
    (z * TAU).cos() * 2.0
}

pub fn cexp_i2pi(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x)
}

/// Least-squares line y = slope*x + intercept; returns (slope, intercept, max abs residual).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    (slope, intercept, resid)
}

/// Hausdorff distance between two finite point sets on the line.
/// Both inputs must be sorted ascending.
pub fn hausdorff_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed_sorted(a, b).max(directed_sorted(b, a))
}

fn directed_sorted(a: &[f64], b: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in a {
        let i = b.partition_point(|&y| y < x);
        let mut d = f64::INFINITY;
        if i < b.len() {
            d = d.min((b[i] - x).abs());
        }
        if i > 0 {
            d = d.min((x - b[i - 1]).abs());
        }
        worst = worst.max(d);
    }
    worst
}

/// Hausdorff distance between finite sets of complex points (quadratic scan).
pub fn hausdorff_complex(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dir = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    dir(a, b).max(dir(b, a))
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_roundtrip() {
        let z = Complex64::new(-3.0, 4.0);
        let l = LogDet::from_complex(z);
        assert!((l.to_complex() - z).norm() < 1e-14);
        assert!(LogDet::from_complex(Complex64::new(0.0, 0.0)).is_zero());
        let p = l.mul(&l);
        assert!((p.to_complex() - z * z).norm() < 1e-12);
    }

    #[test]
    fn fit_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, b, r) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-13 && r < 1e-13);
    }

    #[test]
    fn hausdorff_basic() {
        assert_eq!(hausdorff_sorted(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        assert!((hausdorff_sorted(&[0.0, 1.0], &[0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dist_and_wrap() {
        assert!((dist_z(0.9) - 0.1).abs() < 1e-15);
        assert!((dist_z(-0.3) - 0.3).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
    }
}
