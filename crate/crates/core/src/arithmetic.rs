//! Continued fractions, finite-depth β proxy and ε₀-resonances.

use crate::error::{Error, Result};
use crate::numeric::dist_z;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A frequency α ∈ (0,1) in a form that supports exact continued fractions.
#[derive(Debug, Clone, PartialEq)]
pub enum Frequency {
    /// An exact rational (parsed decimal or an f64 taken literally), with the
    /// number of significand bits the input actually carried.
    Rational { value: BigRational, precision_bits: u32 },
    /// The quadratic surd (a + b√c)/den.
    Surd { a: BigInt, b: BigInt, c: BigInt, den: BigInt },
}

impl Frequency {
    /// Parses a decimal string such as `"0.6180339887498948482"`.
    pub fn from_decimal(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidInput(format!("malformed decimal frequency {s:?}"));
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (t, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((a, b)) => (a, b),
            None => (mantissa, ""),
        };
        if int_part.starts_with('-') || int_part.starts_with('+') {
            return Err(bad());
        }
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().map_err(|_| bad())?;
        let scale = frac_part.len() as i32 - exp;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::new(num, num_traits::pow(ten, scale as usize))
        } else {
            BigRational::from_integer(num * num_traits::pow(ten, (-scale) as usize))
        };
        let sig = digits.trim_start_matches('0').len().max(1);
        let precision_bits = (sig as f64 * std::f64::consts::LOG2_10).ceil() as u32;
        Self::check_unit(Frequency::Rational { value, precision_bits })
    }

    /// Takes an f64 literally (an exact dyadic rational with 53-bit precision).
    pub fn from_f64(x: f64) -> Result<Self> {
        let value = BigRational::from_float(x)
            .ok_or_else(|| Error::InvalidInput(format!("non-finite frequency {x}")))?;
        Self::check_unit(Frequency::Rational { value, precision_bits: 53 })
    }

    pub fn surd(a: i64, b: i64, c: i64, den: i64) -> Result<Self> {
        if den == 0 || c < 0 {
            return Err(Error::InvalidInput("surd needs den ≠ 0 and c ≥ 0".into()));
        }
        Self::check_unit(Frequency::Surd {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            den: den.into(),
        })
    }

    /// Golden-mean frequency (√5 − 1)/2.
    pub fn golden() -> Self {
        Frequency::surd(-1, 1, 5, 2).expect("golden mean is in (0,1)")
    }

    fn check_unit(f: Self) -> Result<Self> {
        let x = f.to_f64();
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidInput(format!("frequency {x} not in (0,1)")));
        }
        Ok(f)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Frequency::Rational { value, .. } => ratio_to_f64(value),
            Frequency::Surd { a, b, c, den } => {
                let (a, b, c, d) = (
                    a.to_f64().unwrap(),
                    b.to_f64().unwrap(),
                    c.to_f64().unwrap(),
                    den.to_f64().unwrap(),
                );
                (a + b * c.sqrt()) / d
            }
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Rational { value, .. } => write!(f, "{}/{}", value.numer(), value.denom()),
            Frequency::Surd { a, b, c, den } => write!(f, "({a} + {b}√{c})/{den}"),
        }
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Scale so numerator and denominator both fit comfortably in f64.
    let n = r.numer();
    let d = r.denom();
    let shift = (n.bits().max(d.bits()) as i64 - 900).max(0) as usize;
    let nf = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let df = (d >> shift).to_f64().unwrap_or(f64::NAN);
    nf / df
}

/// Continued fraction α = [0; a_1, a_2, …] with convergents p_k/q_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub alpha: f64,
    /// a_1, …, a_depth.
    pub partial_quotients: Vec<u64>,
    /// (p_k, q_k) for k = 0, …, depth, as decimal strings (exact).
    pub convergents: Vec<(String, String)>,
    /// α_k = {1/α_{k−1}} for k = 0, …, depth (α_0 = α), rounded to f64.
    pub remainders: Vec<f64>,
}

impl ContinuedFraction {
    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    /// Denominators q_0, …, q_depth (saturating at u64::MAX).
    pub fn denominators(&self) -> Vec<u64> {
        self.convergents.iter().map(|(_, q)| q.parse::<u64>().unwrap_or(u64::MAX)).collect()
    }

    pub fn denominators_f64(&self) -> Vec<f64> {
        self.convergents.iter().map(|(_, q)| q.parse::<f64>().unwrap()).collect()
    }

    /// ‖q_k α‖ = α_0 α_1 ⋯ α_k, accurate to relative f64 precision.
    pub fn approximation_error(&self, k: usize) -> f64 {
        self.remainders[..=k].iter().product()
    }
}

/// Expands α to `depth` partial quotients in exact arithmetic.
pub fn continued_fraction(alpha: &Frequency, depth: usize) -> Result<ContinuedFraction> {
    let mut quotients: Vec<BigInt> = Vec::with_capacity(depth);
    let mut remainders = vec![alpha.to_f64()];
    match alpha {
        Frequency::Rational { value, precision_bits } => {
            let threshold = 2f64.powf(-(*precision_bits as f64) / 2.0);
            let mut x = value.clone();
            for k in 1..=depth {
                let inv = x.recip();
                let a = inv.floor();
                x = inv - &a;
                quotients.push(a.to_integer());
                let xf = ratio_to_f64(&x);
                remainders.push(xf);
                if x.is_zero() || xf < threshold {
                    return Err(Error::PrecisionExhausted { k });
                }
            }
        }
        Frequency::Surd { a, b, c, den } => {
            let mut s = SurdState::new(a, b, c, den)?;
            for k in 1..=depth {
                s = s.invert();
                let q = s.floor();
                s.p -= &q * &s.q;
                quotients.push(q);
                remainders.push(s.to_f64());
                if s.is_zero() {
                    return Err(Error::PrecisionExhausted { k });
                }
            }
        }
    }
    let mut convergents = Vec::with_capacity(depth + 1);
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    convergents.push((p.to_string(), q.to_string()));
    for a in &quotients {
        let pn = a * &p + &p_prev;
        let qn = a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, pn);
        q_prev = std::mem::replace(&mut q, qn);
        convergents.push((p.to_string(), q.to_string()));
    }
    Ok(ContinuedFraction {
        alpha: alpha.to_f64(),
        partial_quotients: quotients.iter().map(|a| a.to_u64().unwrap_or(u64::MAX)).collect(),
        convergents,
        remainders,
    })
}

/// x = (p + √d)/q with q | (d − p²), d > 0 not a perfect square.
struct SurdState {
    p: BigInt,
    d: BigInt,
    q: BigInt,
    sqrt_d: BigInt,
}

impl SurdState {
    fn new(a: &BigInt, b: &BigInt, c: &BigInt, den: &BigInt) -> Result<Self> {
        let d = b * b * c;
        let sqrt_d = d.sqrt();
        if b.is_zero() || &sqrt_d * &sqrt_d == d {
            return Err(Error::InvalidInput("surd frequency is rational".into()));
        }
        let (mut p, mut q) = if b.is_positive() { (a.clone(), den.clone()) } else { (-a, -den) };
        let mut d = d;
        if !(&d - &p * &p).is_multiple_of(&q) {
            let qa = q.abs();
            p *= &qa;
            d *= &q * &q;
            q *= &qa;
        }
        let sqrt_d = d.sqrt();
        Ok(SurdState { p, d, q, sqrt_d })
    }

    fn invert(self) -> Self {
        let qn = (&self.d - &self.p * &self.p) / &self.q;
        SurdState { p: -self.p, d: self.d, q: qn, sqrt_d: self.sqrt_d }
    }

    fn floor(&self) -> BigInt {
        if self.q.sign() == Sign::Plus {
            (&self.p + &self.sqrt_d).div_floor(&self.q)
        } else {
            (-&self.p - &self.sqrt_d - BigInt::one()).div_floor(&(-&self.q))
        }
    }

    fn is_zero(&self) -> bool {
        false
    }

    fn to_f64(&self) -> f64 {
        // (p + √d)/q = (d − p²)/(q(√d − p)) avoids cancellation when p ≈ −√d.
        let df = self.d.to_f64().unwrap();
        let pf = self.p.to_f64().unwrap();
        let qf = self.q.to_f64().unwrap();
        let num = (&self.d - &self.p * &self.p).to_f64().unwrap();
        if pf < 0.0 {
            num / (qf * (df.sqrt() - pf))
        } else {
            (pf + df.sqrt()) / qf
        }
    }
}

/// Finite-depth proxy for β(α): the supremum of ln(q_{k+1})/q_k over the
/// upper half of the computed indices.
pub fn beta_estimate(cf: &ContinuedFraction) -> Result<f64> {
    let q = cf.denominators_f64();
    if q.len() < 3 {
        return Err(Error::InvalidInput("β proxy needs at least 3 convergents".into()));
    }
    let last = q.len() - 1;
    let start = last / 2;
    Ok((start..last).map(|k| q[k + 1].ln() / q[k]).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub n: i64,
    /// ‖2θ − nα‖.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub theta: f64,
    pub eps0: f64,
    pub horizon: u64,
    pub resonances: Vec<Resonance>,
}

impl ResonanceSet {
    pub fn indices(&self) -> Vec<i64> {
        self.resonances.iter().map(|r| r.n).collect()
    }
}

/// All ε₀-resonances n with |n| ≤ K, ordered by |n|, then distance, then sign.
pub fn resonances(theta: f64, alpha: f64, eps0: f64, horizon: u64) -> Result<ResonanceSet> {
    if !(eps0 > 0.0) || horizon < 1 {
        return Err(Error::InvalidInput("resonances need eps0 > 0 and K ≥ 1".into()));
    }
    let dist = |n: i64| dist_z(2.0 * theta - n as f64 * alpha);
    let mut out = Vec::new();
    let mut running = f64::INFINITY;
    for m in 0..=horizon as i64 {
        let cands: Vec<i64> = if m == 0 { vec![0] } else { vec![m, -m] };
        let level_min = cands.iter().map(|&n| dist(n)).fold(f64::INFINITY, f64::min);
        running = running.min(level_min);
        let bound = (-eps0 * m as f64).exp();
        let mut found: Vec<Resonance> = cands
            .iter()
            .map(|&n| Resonance { n, distance: dist(n) })
            .filter(|r| r.distance <= running && r.distance <= bound)
            .collect();
        found.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap().then(b.n.cmp(&a.n)));
        out.extend(found);
    }
    Ok(ResonanceSet { theta, eps0, horizon, resonances: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_quotients() {
        let cf = continued_fraction(&Frequency::golden(), 6).unwrap();
        assert_eq!(cf.partial_quotients, vec![1; 6]);
        assert_eq!(&cf.denominators()[..6], &[1, 1, 2, 3, 5, 8]);
    }

    #[test]
    fn sqrt2_quotients() {
        let f = Frequency::surd(-1, 1, 2, 1).unwrap();
        let cf = continued_fraction(&f, 5).unwrap();
        assert_eq!(cf.partial_quotients, vec![2; 5]);
        assert_eq!(&cf.denominators()[..5], &[1, 2, 5, 12, 29]);
    }

    #[test]
    fn near_rational_cutoff() {
        let f = Frequency::from_decimal("0.5000000000000000001").unwrap();
        let cf = continued_fraction(&f, 1).unwrap();
        assert_eq!(cf.partial_quotients, vec![1]);
        assert_eq!(cf.denominators()[1], 1);
        assert_eq!(continued_fraction(&f, 5), Err(Error::PrecisionExhausted { k: 2 }));
    }

    #[test]
    fn exact_rational_terminates() {
        let f = Frequency::from_decimal("0.375").unwrap();
        assert!(matches!(continued_fraction(&f, 10), Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn decimal_parsing() {
        assert!(Frequency::from_decimal("abc").is_err());
        assert!(Frequency::from_decimal("1.5").is_err());
        assert!(Frequency::from_decimal("-0.3").is_err());
        assert!(Frequency::from_decimal("0").is_err());
        let f = Frequency::from_decimal("6.18e-1").unwrap();
        assert!((f.to_f64() - 0.618).abs() < 1e-16);
    }

    #[test]
    fn surd_with_negative_b() {
        // (3 − √5)/2 = 1 − golden = [0; 2, 1, 1, 1, …]
        let f = Frequency::surd(3, -1, 5, 2).unwrap();
        let cf = continued_fraction(&f, 6).unwrap();
        assert_eq!(cf.partial_quotients, vec![2, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn resonance_trivial_cases() {
        let a = Frequency::golden().to_f64();
        let r = resonances(a / 2.0, a, 0.5, 50).unwrap();
        assert!(r.resonances.iter().any(|x| x.n == 1 && x.distance == 0.0));
        let r0 = resonances(0.0, a, 3.0, 50).unwrap();
        assert_eq!(r0.resonances[0], Resonance { n: 0, distance: 0.0 });
    }
}
