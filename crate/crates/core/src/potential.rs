//! Real trigonometric polynomials V(z) = Σ_{|k|≤d} V_k e^{2πikz}.

use crate::error::{Error, Result};
use crate::numeric::TAU;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    /// V_{−d}, …, V_d.
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// Builds V from the full coefficient list V_{−d}, …, V_d.
    ///
    /// Checks V_{−k} = conj(V_k) (relative 1e−12) and that the list has odd length.
    /// Trailing zero pairs are trimmed so the degree is exact; the zero
    /// polynomial has degree 0.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidInput(
                "potential needs 2d+1 coefficients V_{-d..d}".into(),
            ));
        }
        let d = coeffs.len() / 2;
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for k in 0..=d {
            if (coeffs[d - k] - coeffs[d + k].conj()).norm() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "potential is not real: V_-{k} != conj(V_{k})"
                )));
            }
        }
        let mut c = coeffs;
        // Force exact Hermitian symmetry.
        for k in 0..=d {
            let v = c[d + k];
            c[d - k] = v.conj();
        }
        c[d].im = 0.0;
        let mut p = TrigPolynomial { coeffs: c };
        while p.degree() > 0 && p.leading().norm() == 0.0 {
            p.coeffs.remove(0);
            p.coeffs.pop();
        }
        Ok(p)
    }

    /// From V_0, V_1, …, V_d (the negative side is the conjugate mirror).
    pub fn from_nonneg(pos: &[Complex64]) -> Result<Self> {
        if pos.is_empty() {
            return Err(Error::InvalidInput("empty potential".into()));
        }
        let mut c: Vec<Complex64> = pos[1..].iter().rev().map(|z| z.conj()).collect();
        c.extend_from_slice(pos);
        Self::new(c)
    }

    /// Almost Mathieu potential 2λcos(2πz).
    pub fn amo(lambda: f64) -> Self {
        Self::from_nonneg(&[Complex64::new(0.0, 0.0), Complex64::new(lambda, 0.0)]).unwrap()
    }

    pub fn zero() -> Self {
        TrigPolynomial { coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn constant(v0: f64) -> Self {
        TrigPolynomial { coeffs: vec![Complex64::new(v0, 0.0)] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// V_k, zero outside [−d, d].
    pub fn coeff(&self, k: i64) -> Complex64 {
        let d = self.degree() as i64;
        if k.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn leading(&self) -> Complex64 {
        self.coeff(self.degree() as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let d = self.degree() as i64;
        let mut s = self.coeff(0);
        for k in 1..=d {
            let e = (Complex64::i() * TAU * k as f64 * z).exp();
            let em = (-Complex64::i() * TAU * k as f64 * z).exp();
            s += self.coeff(k) * e + self.coeff(-k) * em;
        }
        s
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    /// Σ|V_k|, a bound for sup |V| on the real line.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrigPolynomial { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// True if V(−z) = V(z), i.e. all coefficients real.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }
}
