//! Finite Fourier series on the torus, optionally with half-integer
//! frequencies j + 1/2 (anti-periodic maps, as produced by e^{πinz} twists).

use crate::error::{Error, Result};
use crate::numeric::TAU;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Boundary-line grid used for strip norms.
pub const STRIP_GRID: usize = 512;

/// f(z) = Σ_k coeffs[k]·e^{2πi(j_min + k + h/2)z}, h = 1 when `half`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticTorusFunction {
    pub j_min: i64,
    pub coeffs: Vec<Complex64>,
    pub half: bool,
    /// Width of the strip on which f is known to be analytic (None: entire).
    pub band_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandNorm {
    /// max |f| over the grid on Im z = ±r.
    pub grid: f64,
    /// Σ|f̂_j|e^{2πr|j|}.
    pub fourier_bound: f64,
}

impl AnalyticTorusFunction {
    pub fn new(j_min: i64, coeffs: Vec<Complex64>) -> Self {
        Self { j_min, coeffs, half: false, band_limit: None }
    }

    pub fn zero() -> Self {
        Self::new(0, vec![ZERO])
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(0, vec![c])
    }

    pub fn monomial(j: i64, c: Complex64) -> Self {
        Self::new(j, vec![c])
    }

    pub fn with_band_limit(mut self, r: Option<f64>) -> Self {
        self.band_limit = r;
        self
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.coeffs.len() as i64 - 1
    }

    /// Frequency attached to index j.
    pub fn freq(&self, j: i64) -> f64 {
        j as f64 + if self.half { 0.5 } else { 0.0 }
    }

    pub fn coeff(&self, j: i64) -> Complex64 {
        if j < self.j_min || j > self.j_max() {
            ZERO
        } else {
            self.coeffs[(j - self.j_min) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(k, c)| (self.j_min + k as i64, *c))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut s = ZERO;
        for (j, c) in self.iter() {
            if c != ZERO {
                s += c * (Complex64::i() * TAU * self.freq(j) * z).exp();
            }
        }
        s
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    /// z ↦ f(z + a).
    pub fn shift(&self, a: f64) -> Self {
        let mut out = self.clone();
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let f = self.freq(self.j_min + k as i64);
            *c *= Complex64::from_polar(1.0, TAU * f * a);
        }
        out
    }

    /// z ↦ conj(f(z̄)).
    pub fn conj_reflect(&self) -> Self {
        let h = self.half as i64;
        let coeffs: Vec<Complex64> = self.coeffs.iter().rev().map(|c| c.conj()).collect();
        Self { j_min: -self.j_max() - h, coeffs, half: self.half, band_limit: self.band_limit }
    }

    /// z ↦ e^{πinz} f(z).
    pub fn twist(&self, n: i64) -> Self {
        let total = 2 * self.j_min + self.half as i64 + n;
        let half = total.rem_euclid(2) == 1;
        Self { j_min: (total - half as i64) / 2, coeffs: self.coeffs.clone(), half, band_limit: self.band_limit }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|x| *x *= c);
        out
    }

    fn min_band(a: Option<f64>, b: Option<f64>) -> Option<f64> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    pub fn add(&self, g: &Self) -> Self {
        assert_eq!(self.half, g.half, "adding functions with different twists");
        let lo = self.j_min.min(g.j_min);
        let hi = self.j_max().max(g.j_max());
        let coeffs = (lo..=hi).map(|j| self.coeff(j) + g.coeff(j)).collect();
        Self { j_min: lo, coeffs, half: self.half, band_limit: Self::min_band(self.band_limit, g.band_limit) }
    }

    pub fn sub(&self, g: &Self) -> Self {
        self.add(&g.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product by direct convolution.
    pub fn mul(&self, g: &Self) -> Self {
        let carry = (self.half && g.half) as i64;
        let mut coeffs = vec![ZERO; self.coeffs.len() + g.coeffs.len() - 1];
        for (a, ca) in self.coeffs.iter().enumerate() {
            if *ca == ZERO {
                continue;
            }
            for (b, cb) in g.coeffs.iter().enumerate() {
                coeffs[a + b] += ca * cb;
            }
        }
        Self {
            j_min: self.j_min + g.j_min + carry,
            coeffs,
            half: self.half ^ g.half,
            band_limit: Self::min_band(self.band_limit, g.band_limit),
        }
    }

    /// Coefficient of frequency 0 (zero for half-integer series).
    pub fn mean(&self) -> Complex64 {
        if self.half {
            ZERO
        } else {
            self.coeff(0)
        }
    }

    /// Drops outer coefficients below tol·max|f̂|.
    pub fn trim(&self, tol: f64) -> Self {
        let m = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if m == 0.0 {
            return Self { j_min: 0, coeffs: vec![ZERO], ..self.clone() };
        }
        let keep = |c: &Complex64| c.norm() > tol * m;
        let a = self.coeffs.iter().position(keep).unwrap();
        let b = self.coeffs.iter().rposition(keep).unwrap();
        Self { j_min: self.j_min + a as i64, coeffs: self.coeffs[a..=b].to_vec(), ..self.clone() }
    }

    /// Zeroes every coefficient below tol·max and then trims; used on series
    /// that come from sampled data, whose tails are roundoff.
    pub fn denoise(&self, tol: f64) -> Self {
        let m = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let coeffs = self.coeffs.iter().map(|c| if c.norm() > tol * m { *c } else { ZERO }).collect();
        Self { coeffs, ..self.clone() }.trim(0.0)
    }

    pub fn fourier_bound(&self, r: f64) -> f64 {
        self.iter().map(|(j, c)| c.norm() * (TAU * r * self.freq(j).abs()).exp()).sum()
    }

    /// Grid maximum over Im z = ±r plus the Fourier bound.
    pub fn band_norm(&self, r: f64) -> Result<BandNorm> {
        if let Some(b) = self.band_limit {
            if r > b {
                return Err(Error::InvalidInput(format!("r = {r} exceeds the band limit {b}")));
            }
        }
        let mut grid: f64 = 0.0;
        for y in strip_lines(r) {
            for k in 0..STRIP_GRID {
                let z = Complex64::new(k as f64 / STRIP_GRID as f64, y);
                grid = grid.max(self.eval(z).norm());
            }
        }
        Ok(BandNorm { grid, fourier_bound: self.fourier_bound(r) })
    }

    /// Fourier coefficients from m equispaced samples f(k/m) on the real line.
    /// For half-integer series the samples are untwisted first.
    pub fn from_samples(samples: &[Complex64], half: bool) -> Self {
        let m = samples.len();
        let mut buf: Vec<Complex64> = samples
            .iter()
            .enumerate()
            .map(|(k, s)| if half { s * Complex64::from_polar(1.0, -TAU * 0.5 * k as f64 / m as f64) } else { *s })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let lo = -((m / 2) as i64);
        let coeffs = (0..m)
            .map(|k| {
                let j = lo + k as i64;
                buf[j.rem_euclid(m as i64) as usize] / m as f64
            })
            .collect();
        Self { j_min: lo, coeffs, half, band_limit: None }
    }

    /// Series from samples on the lines Im z = −r (used for modes j ≥ 0) and
    /// Im z = +r (modes j < 0), so each coefficient is resolved relative to
    /// its weight e^{2πr|j|} on the strip boundary.
    pub fn from_line_samples(lower: &[Complex64], upper: &[Complex64], half: bool, r: f64) -> Self {
        let m = lower.len();
        assert_eq!(m, upper.len());
        let h = if half { 0.5 } else { 0.0 };
        let line = |samples: &[Complex64], y: f64| -> Vec<Complex64> {
            let mut buf: Vec<Complex64> = samples
                .iter()
                .enumerate()
                .map(|(k, s)| s * (Complex64::new(0.0, -TAU * h) * Complex64::new(k as f64 / m as f64, y)).exp())
                .collect();
            FftPlanner::new().plan_fft_forward(m).process(&mut buf);
            buf
        };
        let lo_buf = line(lower, -r);
        let up_buf = line(upper, r);
        let lo = -((m / 2) as i64);
        let coeffs = (0..m)
            .map(|k| {
                let j = lo + k as i64;
                let idx = j.rem_euclid(m as i64) as usize;
                let (b, y) = if j >= 0 { (lo_buf[idx], -r) } else { (up_buf[idx], r) };
                b / m as f64 * (TAU * j as f64 * y).exp()
            })
            .collect();
        Self { j_min: lo, coeffs, half, band_limit: None }
    }

    /// Samples an analytic `f` on both boundary lines of the r-strip.
    pub fn from_fn_strip(f: impl Fn(Complex64) -> Complex64, m: usize, half: bool, r: f64) -> Self {
        let at = |y: f64| -> Vec<Complex64> { (0..m).map(|k| f(Complex64::new(k as f64 / m as f64, y))).collect() };
        Self::from_line_samples(&at(-r), &at(r), half, r)
    }

    /// Zeroes coefficients whose strip weight |c_j|e^{2πr|f_j|} is below
    /// tol times the largest weight, then trims.
    pub fn denoise_strip(&self, tol: f64, r: f64) -> Self {
        let w: Vec<f64> = self.iter().map(|(j, c)| c.norm() * (TAU * r * self.freq(j).abs()).exp()).collect();
        let m = w.iter().cloned().fold(0.0, f64::max);
        let coeffs = self.coeffs.iter().zip(&w).map(|(c, wj)| if *wj > tol * m { *c } else { ZERO }).collect();
        Self { coeffs, ..self.clone() }.trim(0.0)
    }

    /// Samples `f` on m real points and transforms.
    pub fn from_fn(f: impl Fn(f64) -> Complex64, m: usize, half: bool) -> Self {
        let samples: Vec<Complex64> = (0..m).map(|k| f(k as f64 / m as f64)).collect();
        Self::from_samples(&samples, half)
    }

    pub fn samples(&self, m: usize) -> Vec<Complex64> {
        (0..m).map(|k| self.eval_real(k as f64 / m as f64)).collect()
    }
}

/// Lines Im z = ±r (just the real axis when r = 0).
pub fn strip_lines(r: f64) -> Vec<f64> {
    if r == 0.0 {
        vec![0.0]
    } else {
        vec![-r, r]
    }
}

/// Points covering |Im z| ≤ r on five horizontal lines.
pub fn strip_points(r: f64, per_line: usize) -> Vec<Complex64> {
    let levels = if r == 0.0 { vec![0.0] } else { vec![-r, -0.5 * r, 0.0, 0.5 * r, r] };
    let mut out = Vec::with_capacity(levels.len() * per_line);
    for y in levels {
        for k in 0..per_line {
            out.push(Complex64::new(k as f64 / per_line as f64, y));
        }
    }
    out
}

/// 2×2 matrix of torus functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusMatrix {
    pub entries: [[AnalyticTorusFunction; 2]; 2],
}

impl TorusMatrix {
    pub fn from_columns(c0: [AnalyticTorusFunction; 2], c1: [AnalyticTorusFunction; 2]) -> Self {
        let [a, c] = c0;
        let [b, d] = c1;
        Self { entries: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        let one = AnalyticTorusFunction::constant(Complex64::new(1.0, 0.0));
        let zero = AnalyticTorusFunction::zero();
        Self { entries: [[one.clone(), zero.clone()], [zero, one]] }
    }

    pub fn eval(&self, z: Complex64) -> Matrix2<Complex64> {
        let e = &self.entries;
        Matrix2::new(e[0][0].eval(z), e[0][1].eval(z), e[1][0].eval(z), e[1][1].eval(z))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let a = &self.entries;
        let b = &other.entries;
        let entry = |i: usize, j: usize| a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
        Self { entries: [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]] }
    }

    pub fn trim(&self, tol: f64) -> Self {
        let e = &self.entries;
        Self {
            entries: [[e[0][0].trim(tol), e[0][1].trim(tol)], [e[1][0].trim(tol), e[1][1].trim(tol)]],
        }
    }

    pub fn j_range(&self) -> (i64, i64) {
        let all = self.entries.iter().flatten();
        let lo = all.clone().map(|f| f.j_min).min().unwrap();
        let hi = all.map(|f| f.j_max()).max().unwrap();
        (lo, hi)
    }

    /// Little-endian dump: header (j_min, j_max, 2, 2) as i64, then each entry
    /// in row-major order as interleaved (re, im) f64 for j = j_min..=j_max.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (lo, hi) = self.j_range();
        for h in [lo, hi, 2, 2] {
            w.write_all(&h.to_le_bytes())?;
        }
        for f in self.entries.iter().flatten() {
            for j in lo..=hi {
                let c = f.coeff(j);
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("dump: {e}"));
        let mut b8 = [0u8; 8];
        let mut header = [0i64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut b8).map_err(io)?;
            *h = i64::from_le_bytes(b8);
        }
        let [lo, hi, rows, cols] = header;
        if rows != 2 || cols != 2 || hi < lo {
            return Err(Error::InvalidInput(format!("dump header {header:?}")));
        }
        let mut fs = Vec::with_capacity(4);
        for _ in 0..4 {
            let mut coeffs = Vec::with_capacity((hi - lo + 1) as usize);
            for _ in lo..=hi {
                r.read_exact(&mut b8).map_err(io)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8).map_err(io)?;
                coeffs.push(Complex64::new(re, f64::from_le_bytes(b8)));
            }
            fs.push(AnalyticTorusFunction::new(lo, coeffs));
        }
        let d = fs.pop().unwrap();
        let c = fs.pop().unwrap();
        let b = fs.pop().unwrap();
        let a = fs.pop().unwrap();
        Ok(Self { entries: [[a, b], [c, d]] })
    }
}

/// Largest singular value of a complex 2×2 matrix.
pub fn norm2_c2(m: &Matrix2<Complex64>) -> f64 {
    let f2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
    ((f2 + (f2 * f2 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

pub fn inverse_c2(m: &Matrix2<Complex64>) -> Matrix2<Complex64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}
