//! Conjugating a subcritical Schrödinger cocycle close to a constant from a
//! localized dual eigenvector: Bloch waves, completion to SL(2), removal of
//! the off-diagonal term, realification and the parabolic branch.

mod torus;

pub use torus::{
    inverse_c2, norm2_c2, strip_lines, strip_points, AnalyticTorusFunction, BandNorm, TorusMatrix, STRIP_GRID,
};

use crate::arithmetic::{resonances, ContinuedFraction, ResonanceSet};
use crate::cocycle::{
    gap_label, generic_cocycle, rotation_number, schrodinger_cocycle, subcritical_radius, GridParams, MatrixMap,
};
use crate::error::{Error, Result};
use crate::localization::{eigenpair_near, nearest_eigenvalue, Eigenpair};
use crate::numeric::{cexp_i2pi, dist_z, frac, linear_fit, two_cos, TAU};
use crate::potential::TrigPolynomial;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Relative size below which Fourier coefficients are dropped. Tiny
/// coefficients still matter off the axis, so only underflow is removed;
/// noise is handled by the strip-weighted denoising of sampled series.
const TRIM: f64 = 1e-300;
/// Relative noise floor of series obtained from samples.
const NOISE: f64 = 1e-14;

type F = AnalyticTorusFunction;

fn a_e(v: &TrigPolynomial, energy: f64, z: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(Complex64::new(energy, 0.0) - v.eval(z), -ONE, ONE, ZERO)
}

fn rotation(theta: f64) -> Matrix2<Complex64> {
    let (s, c) = (TAU * theta).sin_cos();
    Matrix2::new(Complex64::new(c, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(c, 0.0))
}

/// sup over Im z = ±r of ‖W(z+α)^{-1} A_E(z) W(z) − target‖.
pub fn conjugation_error(
    v: &TrigPolynomial,
    alpha: f64,
    energy: f64,
    w: &TorusMatrix,
    target: &Matrix2<Complex64>,
    r: f64,
    grid: usize,
) -> f64 {
    let mut worst: f64 = 0.0;
    for y in strip_lines(r) {
        for k in 0..grid {
            let z = Complex64::new(k as f64 / grid as f64, y);
            let c = inverse_c2(&w.eval(z + alpha)) * a_e(v, energy, z) * w.eval(z);
            worst = worst.max(norm2_c2(&(c - target)));
        }
    }
    worst
}

/// Size of a sampling grid that resolves a series spanning `span` modes.
fn grid_for(span: i64) -> usize {
    ((4 * span.max(1) + 64) as usize).next_power_of_two().max(512)
}

fn span(f: &F) -> i64 {
    f.j_max().abs().max(f.j_min.abs()) + 1
}

/// Keeps the modes of `f` inside [lo, hi].
fn band(f: &F, lo: i64, hi: i64) -> F {
    let a = f.j_min.max(lo);
    let b = f.j_max().min(hi);
    if a > b {
        return F::new(0, vec![ZERO]);
    }
    F::new(a, (a..=b).map(|j| f.coeff(j)).collect()).trim(TRIM)
}

/// Newton polishing of y ≈ f^{-1/p} (p = 1 or 2) in coefficient space, where
/// roundoff in high modes stays relative to the product terms.
fn newton_polish(f: &F, y0: F, sqrt: bool) -> F {
    let w = (y0.j_max() - y0.j_min + 1) / 4 + 16;
    let (lo, hi) = (y0.j_min - w, y0.j_max() + w);
    let mut y = y0;
    for _ in 0..3 {
        y = if sqrt {
            let r = F::constant(ONE * 3.0).sub(&f.mul(&y.mul(&y)));
            band(&y.mul(&r).scale(ONE * 0.5), lo, hi)
        } else {
            let r = F::constant(ONE * 2.0).sub(&f.mul(&y));
            band(&y.mul(&r), lo, hi)
        };
    }
    y
}

fn strip_weight(f: &F, r: f64) -> f64 {
    f.fourier_bound(r).max(f64::MIN_POSITIVE)
}

/// Series from boundary-line samples (`lines(m, y)` samples Im z = y on m
/// points), doubling m until the strip-weighted change drops below 1e−13.
fn strip_series(lines: impl Fn(usize, f64) -> Vec<Complex64>, m0: usize, half: bool, r: f64) -> F {
    let mut m = m0;
    let mut prev: Option<F> = None;
    for _ in 0..7 {
        let g = F::from_line_samples(&lines(m, -r), &lines(m, r), half, r).denoise_strip(NOISE, r);
        if let Some(p) = &prev {
            if strip_weight(&g.sub(p), r) <= 1e-13 * strip_weight(&g, r) {
                return g;
            }
        }
        prev = Some(g);
        m *= 2;
    }
    prev.unwrap()
}

fn line_points(m: usize, y: f64) -> impl Iterator<Item = Complex64> {
    (0..m).map(move |k| Complex64::new(k as f64 / m as f64, y))
}

/// Series of z ↦ h(f(z)) on the r-strip.
fn compose(f: &F, h: impl Fn(Complex64) -> Complex64, out_half: bool, r: f64) -> F {
    strip_series(|m, y| line_points(m, y).map(|z| h(f.eval(z))).collect(), grid_for(span(f)), out_half, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochData {
    pub x1: i64,
    pub x2: i64,
    /// U^I(z) = (e^{2πiθ}u^I(z), u^I(z−α)).
    pub u: [F; 2],
    /// First component of A_E U^I − e^{2πiθ}U^I(·+α).
    pub g: F,
    /// Max defect of that identity over a 256-point real grid, relative to max(1, |U^I|).
    pub residual: f64,
}

/// Bloch vector of the truncated eigenvector on I = [x1, x2] and its defect g.
/// Coefficients enter as conj(u_j) so that the Fourier series solves the
/// convolution form of the eigen-equation.
pub fn build_bloch(v: &TrigPolynomial, alpha: f64, pair: &Eigenpair, x1: i64, x2: i64) -> Result<BlochData> {
    let d = v.degree() as i64;
    if x2 < x1 || x1 < pair.lo + d || x2 > pair.hi - d {
        return Err(Error::IndexOutOfRange { index: if x1 < pair.lo + d { x1 } else { x2 }, lo: pair.lo + d, hi: pair.hi - d });
    }
    let theta = pair.theta;
    let energy = pair.energy;
    let w = |j: i64| pair.u_at(j).conj();
    let ui = F::new(x1, (x1..=x2).map(w).collect());
    let e_th = cexp_i2pi(theta);
    let u = [ui.scale(e_th), ui.shift(-alpha)];
    let outside = |j: i64| j < x1 || j > x2;
    let reach = 2 * (x2 - x1 + 1) + 10 * d + 20;
    let (glo, ghi) = ((x1 - reach).max(pair.lo), (x2 + reach).min(pair.hi));
    let mut gc = Vec::with_capacity((ghi - glo + 1) as usize);
    for j in glo..=ghi {
        let mut s = ZERO;
        if outside(j) {
            s -= (Complex64::new(energy, 0.0) - two_cos(Complex64::new(theta + j as f64 * alpha, 0.0))) * w(j);
        }
        for k in -d..=d {
            if outside(j - k) {
                s += w(j - k) * v.coeff(k);
            }
        }
        gc.push(s * e_th);
    }
    let g = F::new(glo, gc).trim(TRIM);
    let scale = (0..256)
        .map(|k| {
            let z = Complex64::new(k as f64 / 256.0, 0.0);
            u[0].eval(z).norm().max(u[1].eval(z).norm())
        })
        .fold(1.0f64, f64::max);
    let mut residual: f64 = 0.0;
    for k in 0..256 {
        let z = Complex64::new(k as f64 / 256.0, 0.0);
        let a = a_e(v, energy, z);
        let (u0, u1) = (u[0].eval(z), u[1].eval(z));
        let (s0, s1) = (u[0].eval(z + alpha), u[1].eval(z + alpha));
        let r0 = a[(0, 0)] * u0 + a[(0, 1)] * u1 - e_th * s0 - g.eval(z);
        let r1 = a[(1, 0)] * u0 + a[(1, 1)] * u1 - e_th * s1;
        residual = residual.max(r0.norm()).max(r1.norm());
    }
    Ok(BlochData { x1, x2, u, g, residual: residual / scale })
}

/// inf of ‖U(z)‖ over |Im z| ≤ r.
pub fn strip_floor(u: &[F; 2], r: f64) -> f64 {
    strip_points(r, 256)
        .into_iter()
        .map(|z| u[0].eval(z).norm().hypot(u[1].eval(z).norm()))
        .fold(f64::INFINITY, f64::min)
}

/// Floor below which a Bloch vector counts as vanishing.
pub const VECTOR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub m: TorusMatrix,
    pub floor: f64,
    /// max |det M − 1| over the strip grid.
    pub det_error: f64,
}

/// SL(2, C)-valued M with first column U: the second column is
/// (−u₂*, u₁*)/q with q = u₁u₁* + u₂u₂* and f*(z) = conj(f(z̄)).
pub fn complete_to_sl2(u: &[F; 2], r: f64) -> Result<Completion> {
    let floor = strip_floor(u, r);
    if floor < VECTOR_FLOOR {
        return Err(Error::VectorVanishes { floor });
    }
    let s0 = u[0].conj_reflect();
    let s1 = u[1].conj_reflect();
    let q = u[0].mul(&s0).add(&u[1].mul(&s1)).trim(TRIM);
    let inv_q = newton_polish(&q, compose(&q, |x| ONE / x, false, r), false);
    let col1 = [s1.mul(&inv_q).scale(-ONE).trim(TRIM), s0.mul(&inv_q).trim(TRIM)];
    let m = TorusMatrix::from_columns(u.clone(), col1);
    let det_error = strip_points(r, 128)
        .into_iter()
        .map(|z| {
            let e = m.eval(z);
            (e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)] - ONE).norm()
        })
        .fold(0.0, f64::max);
    Ok(Completion { m, floor, det_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub tau: F,
    pub tail: F,
    pub cutoff: u64,
    pub divisor_floor: f64,
    /// max_j |b̂_j − e^{−2πiθ}e^{2πijα}τ̂_j + e^{2πiθ}τ̂_j − tail_j|.
    pub identity_error: f64,
}

/// τ with b − e^{−2πiθ}τ(·+α) + e^{2πiθ}τ supported on |j| ≥ n.
pub fn eliminate_offdiag(b: &F, theta: f64, alpha: f64, n: u64) -> Result<Elimination> {
    let em = cexp_i2pi(-theta);
    let ep = cexp_i2pi(theta);
    let mut tau = b.scale(ZERO);
    let mut tail = b.clone();
    let mut bad = Vec::new();
    let mut floor = f64::INFINITY;
    for (k, (j, bj)) in b.iter().enumerate() {
        let f = b.freq(j);
        if f.abs() >= n as f64 {
            continue;
        }
        let div = ONE - cexp_i2pi(-(2.0 * theta - f * alpha));
        floor = floor.min(div.norm());
        if div.norm() <= 1e-12 {
            bad.push(j);
            continue;
        }
        tau.coeffs[k] = -bj * em / div;
        tail.coeffs[k] = ZERO;
    }
    if !bad.is_empty() {
        return Err(Error::ResonantDivisor { modes: bad });
    }
    let identity_error = b
        .iter()
        .enumerate()
        .map(|(k, (j, bj))| {
            let t = tau.coeffs[k];
            (bj - em * cexp_i2pi(b.freq(j) * alpha) * t + ep * t - tail.coeffs[k]).norm()
        })
        .fold(0.0, f64::max);
    Ok(Elimination { tau: tau.trim(TRIM), tail: tail.trim(TRIM), cutoff: n, divisor_floor: floor, identity_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohomologicalSolution {
    pub phi: F,
    pub mean: Complex64,
    /// max_j of the coefficientwise defect of φ(z+α) − φ(z) = φ1(z) − mean.
    pub identity_error: f64,
}

pub fn cohomological_solve(phi1: &F, alpha: f64) -> Result<CohomologicalSolution> {
    if phi1.half {
        return Err(Error::InvalidInput("cohomological equation needs a periodic right-hand side".into()));
    }
    let mut phi = phi1.scale(ZERO);
    let mut bad = Vec::new();
    for (k, (j, c)) in phi1.iter().enumerate() {
        if j == 0 {
            continue;
        }
        let div = cexp_i2pi(j as f64 * alpha) - ONE;
        if div.norm() <= 1e-12 {
            bad.push(j);
            continue;
        }
        phi.coeffs[k] = c / div;
    }
    if !bad.is_empty() {
        return Err(Error::ResonantDivisor { modes: bad });
    }
    let mean = phi1.mean();
    let identity_error = phi1
        .iter()
        .enumerate()
        .map(|(k, (j, c))| {
            let lhs = phi.coeffs[k] * (cexp_i2pi(j as f64 * alpha) - ONE);
            let rhs = if j == 0 { c - mean } else { c };
            (lhs - rhs).norm()
        })
        .fold(0.0, f64::max);
    Ok(CohomologicalSolution { phi: phi.trim(TRIM), mean, identity_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realified {
    pub w: TorusMatrix,
    /// inf |det W₁| over the strip, before normalization.
    pub det_floor: f64,
    /// max |det W − 1| over the strip grid.
    pub det_drift: f64,
    /// Whether T was negated to make det W₁ positive (the rotation flips sign).
    pub flipped: bool,
    pub twist: i64,
}

/// Floor below which det W₁ counts as vanishing.
pub const DET_FLOOR: f64 = 1e-10;

/// Real conjugacy from a Bloch vector: Ũ = e^{πinz}U, S = Re Ũ, T = −Im Ũ
/// (continued analytically), W = (S, T)/√det(S, T).
pub fn realify(u: &[F; 2], twist: i64, r: f64) -> Result<Realified> {
    let ut: Vec<F> = u.iter().map(|f| f.twist(twist)).collect();
    let half = ONE * 0.5;
    let s: Vec<F> = ut.iter().map(|f| f.add(&f.conj_reflect()).scale(half).trim(TRIM)).collect();
    let mut t: Vec<F> = ut.iter().map(|f| f.sub(&f.conj_reflect()).scale(I * 0.5).trim(TRIM)).collect();
    let mut det = s[0].mul(&t[1]).sub(&s[1].mul(&t[0])).trim(TRIM);
    let det_floor = strip_points(r, 256).into_iter().map(|z| det.eval(z).norm()).fold(f64::INFINITY, f64::min);
    if det_floor < DET_FLOOR {
        return Err(Error::DeterminantVanishes { floor: det_floor });
    }
    let flipped = det.eval_real(0.0).re < 0.0;
    if flipped {
        t = t.iter().map(|f| f.scale(-ONE)).collect();
        det = det.scale(-ONE);
    }
    // Branch of det^{-1/2}: positive on the real axis at x = 0, continued
    // vertically to Im z = y and then along the line.
    let inv_sqrt_line = |m: usize, y: f64| -> Vec<Complex64> {
        let mut prev = det.eval(ZERO);
        let mut phase = prev.arg();
        let mut walk = |z: Complex64| {
            let cur = det.eval(z);
            phase += (cur / prev).arg();
            prev = cur;
            Complex64::from_polar(cur.norm().powf(-0.5), -0.5 * phase)
        };
        for k in 1..64 {
            walk(Complex64::new(0.0, y * k as f64 / 64.0));
        }
        line_points(m, y).map(walk).collect()
    };
    let inv_sqrt = newton_polish(&det, strip_series(inv_sqrt_line, grid_for(span(&det)), false, r), true);
    let w = TorusMatrix::from_columns(
        [s[0].mul(&inv_sqrt).trim(TRIM), s[1].mul(&inv_sqrt).trim(TRIM)],
        [t[0].mul(&inv_sqrt).trim(TRIM), t[1].mul(&inv_sqrt).trim(TRIM)],
    );
    let det_drift = strip_points(r, 128)
        .into_iter()
        .map(|z| {
            let e = w.eval(z);
            (e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)] - ONE).norm()
        })
        .fold(0.0, f64::max);
    Ok(Realified { w, det_floor, det_drift, flipped, twist })
}

/// Turns of the first column of W over [0, 1]; half-integer for twisted W.
pub fn column_turns(w: &TorusMatrix, grid: usize) -> f64 {
    let angle = |x: f64| {
        let m = w.eval(Complex64::new(x, 0.0));
        m[(1, 0)].re.atan2(m[(0, 0)].re)
    };
    let mut total = 0.0;
    let mut prev = angle(0.0);
    for k in 1..=grid {
        let a = angle(k as f64 / grid as f64);
        let mut da = a - prev;
        da -= TAU * (da / TAU).round();
        total += da;
        prev = a;
    }
    total / TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPhase {
    pub theta: f64,
    /// Eigenvalue of the dual section at θ (equal to E up to the refinement tolerance).
    pub energy: f64,
    pub rho: f64,
    /// |θ − candidate| accumulated by the Newton refinement.
    pub correction: f64,
}

/// Phase θ(E) with E an eigenvalue of the dual operator, from the candidates
/// ±ρ(E) and ±(ρ(E) − α/2), refined by Newton steps on the eigenvalue branch.
pub fn find_dual_phase(v: &TrigPolynomial, alpha: f64, energy: f64, rho: f64, sites: usize) -> Result<DualPhase> {
    if v.degree() == 0 {
        let c = (energy - v.coeff(0).re) / 2.0;
        if c.abs() >= 1.0 {
            return Err(Error::NoDualPhase { energy });
        }
        return Ok(DualPhase { theta: c.acos() / TAU, energy, rho, correction: 0.0 });
    }
    let slope = |theta: f64, e: f64| -> Result<(f64, f64)> {
        let pair = eigenpair_near(v, alpha, theta, e, sites)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in pair.lo..=pair.hi {
            let w = pair.u_at(j).norm_sqr();
            num += w * (-2.0 * TAU * (TAU * (pair.theta + j as f64 * alpha)).sin());
            den += w;
        }
        Ok((pair.energy, num / den))
    };
    let mut best: Option<(f64, f64)> = None;
    for cand in [rho, -rho, rho - alpha / 2.0, alpha / 2.0 - rho] {
        let th = frac(cand);
        let lam = nearest_eigenvalue(v, alpha, th, energy, sites);
        let Ok((_, d)) = slope(th, lam) else { continue };
        let step = ((lam - energy) / d).abs();
        if best.map_or(true, |b| step < b.1) {
            best = Some((th, step));
        }
    }
    let Some((mut th, _)) = best else {
        return Err(Error::NoDualPhase { energy });
    };
    let start = th;
    let mut lam = nearest_eigenvalue(v, alpha, th, energy, sites);
    for _ in 0..8 {
        if (lam - energy).abs() <= 1e-13 * (1.0 + energy.abs()) {
            break;
        }
        let (_, d) = slope(th, lam)?;
        th -= (lam - energy) / d;
        lam = nearest_eigenvalue(v, alpha, th, energy, sites);
    }
    let correction = (th - start).abs();
    if correction > 1e-3 || (lam - energy).abs() > 1e-8 {
        return Err(Error::NoDualPhase { energy });
    }
    Ok(DualPhase { theta: frac(th), energy: lam, rho, correction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Target R_θ.
    Rotation,
    /// Target ±[[1, c], [0, 1]].
    Parabolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripError {
    pub r: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationReport {
    pub scale_index: usize,
    /// N: the window is [−⌊N/C0⌋+1, ⌊N/C0⌋−1].
    pub scale: u64,
    pub window: (i64, i64),
    pub energy: f64,
    /// Dual phase θ(E).
    pub theta: f64,
    pub branch: Branch,
    /// Rotation target angle (Rotation branch).
    pub target_angle: Option<f64>,
    /// Off-diagonal constant and sign (Parabolic branch).
    pub parabolic_c: Option<f64>,
    pub parabolic_sign: Option<f64>,
    pub twist: i64,
    pub b: TorusMatrix,
    pub errors: Vec<StripError>,
    /// Error on the real axis from a 256-point grid.
    pub error_0_coarse: f64,
    /// ‖B(·+α)^{-1}A_E B − diag(e^{2πiθ}, e^{−2πiθ})‖ at the largest r, B = M·[[1,τ],[0,1]].
    pub complex_error: Option<f64>,
    /// PSL degree: twice the turns of the first column of B.
    pub degree: i64,
    pub det_floor: f64,
    pub det_drift: f64,
    pub bloch_residual: f64,
    /// ‖g‖ at the largest r (grid value).
    pub g_norm: f64,
    /// inf ‖U^I‖ over the strip and the margin ln(inf) + 2η·N.
    pub u_floor: f64,
    pub floor_margin: f64,
    pub eta: f64,
    pub rho_energy: f64,
    pub rho_conjugated: f64,
    pub rotation_bookkeeping_error: f64,
    /// The next resonance lies beyond the search horizon.
    pub horizon_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceParams {
    pub r_list: Vec<f64>,
    /// Values of N; empty selects three consecutive denominators ≥ 50.
    pub scales: Vec<u64>,
    pub c0: f64,
    pub eps0: f64,
    pub eta: f64,
    pub horizon: u64,
    pub sites: usize,
    pub rho_iterations: usize,
    /// Subcritical radius, measured when None.
    pub h: Option<f64>,
    pub grid: GridParams,
    /// Dual phase θ(E) if already known.
    pub phase: Option<f64>,
    pub conjugated_rho_iterations: usize,
}

impl Default for ReduceParams {
    fn default() -> Self {
        Self {
            r_list: Vec::new(),
            scales: Vec::new(),
            c0: 4.0,
            eps0: 0.5,
            eta: 0.01,
            horizon: 1000,
            sites: 1000,
            rho_iterations: 1_000_000,
            h: None,
            grid: GridParams::default(),
            phase: None,
            conjugated_rho_iterations: 20_000,
        }
    }
}

pub fn default_scales(cf: &ContinuedFraction) -> Vec<u64> {
    let q = cf.denominators();
    let mut out: Vec<u64> = Vec::new();
    for &x in &q {
        if x >= 50 && out.last() != Some(&x) {
            out.push(x);
        }
        if out.len() == 3 {
            break;
        }
    }
    out
}

fn delta_pair(v: &TrigPolynomial, energy: f64, theta: f64, sites: usize) -> Eigenpair {
    let n = 2 * sites + 1;
    let mut u = vec![ZERO; n];
    u[sites] = ONE;
    let log_abs = u.iter().map(|z| z.norm().ln()).collect();
    let _ = v;
    Eigenpair {
        energy,
        theta_input: theta,
        theta,
        sites,
        shift: 0,
        lo: -(sites as i64),
        hi: sites as i64,
        u,
        log_abs,
        residual: 0.0,
        distance: 0.0,
    }
}

/// Rotation number of z ↦ W(z+α)^{-1} A_E(z) W(z), in [0, 1).
fn conjugated_rho(v: &TrigPolynomial, alpha: f64, energy: f64, w: &TorusMatrix, n: usize) -> Result<f64> {
    let w = w.clone();
    let v2 = v.clone();
    let map: MatrixMap = Arc::new(move |z: Complex64| {
        let c = inverse_c2(&w.eval(z + alpha)) * a_e(&v2, energy, z) * w.eval(z);
        DMatrix::from_fn(2, 2, |i, j| c[(i, j)])
    });
    let c = generic_cocycle(alpha, 2, map);
    Ok(rotation_number(&c, n, 0.0)?.rho)
}

/// Runs the conjugation pipeline at each scale.
pub fn almost_reduce(
    v: &TrigPolynomial,
    alpha: f64,
    cf: &ContinuedFraction,
    energy: f64,
    p: &ReduceParams,
) -> Result<Vec<ConjugationReport>> {
    if !(p.c0 > 1.0) || !(p.eta > 0.0) {
        return Err(Error::InvalidInput("need C0 > 1 and η > 0".into()));
    }
    let schr = schrodinger_cocycle(v, energy, alpha);
    let h = match p.h {
        Some(h) => h,
        None => {
            let grid: Vec<f64> = (1..=40).map(|k| 0.0125 * k as f64).collect();
            subcritical_radius(&schr, &grid, None, p.grid)?.h
        }
    };
    if p.r_list.is_empty() || p.r_list.iter().any(|&r| !(r > 0.0 && r < h)) {
        return Err(Error::InvalidInput(format!("radii must lie in (0, h) with h = {h}")));
    }
    let r_max = p.r_list.iter().cloned().fold(0.0, f64::max);
    let rho = rotation_number(&schr, p.rho_iterations, 0.0)?.rho;
    let (gap_k, gap_dist) = gap_label(rho, alpha, 100);
    let parabolic = gap_dist < 1e-4;

    let (theta0, e) = match p.phase {
        Some(t) => (t, energy),
        None => {
            let dp = find_dual_phase(v, alpha, energy, rho, p.sites)?;
            (dp.theta, dp.energy)
        }
    };
    let pair = if v.degree() == 0 {
        delta_pair(v, e, theta0, p.sites)
    } else {
        eigenpair_near(v, alpha, theta0, e, p.sites)?
    };
    let theta = pair.theta;
    let res = resonances(theta, alpha, p.eps0, p.horizon)?;
    let scales = if p.scales.is_empty() { default_scales(cf) } else { p.scales.clone() };
    if scales.is_empty() {
        return Err(Error::InvalidInput("no scales".into()));
    }
    let mut out = Vec::new();
    for (l, &n_scale) in scales.iter().enumerate() {
        let rep = reduce_at_scale(v, alpha, &pair, &res, rho, parabolic, gap_k, n_scale, r_max, p)
            .map_err(|e| e.at_scale(l))?;
        out.push(ConjugationReport { scale_index: l, ..rep });
    }
    Ok(out)
}

/// Resonance n with ‖2θ − nα‖ smallest over |n| ≤ 100.
fn closest_resonance(theta: f64, alpha: f64) -> i64 {
    (-100..=100i64)
        .map(|n| (n, dist_z(2.0 * theta - n as f64 * alpha)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
        .0
}

#[allow(clippy::too_many_arguments)]
fn reduce_at_scale(
    v: &TrigPolynomial,
    alpha: f64,
    pair: &Eigenpair,
    res: &ResonanceSet,
    rho: f64,
    parabolic: bool,
    _gap_k: i64,
    n_scale: u64,
    r_max: f64,
    p: &ReduceParams,
) -> Result<ConjugationReport> {
    let energy = pair.energy;
    let theta = pair.theta;
    let half = (n_scale as f64 / p.c0).floor() as i64 - 1;
    let d = v.degree() as i64;
    let (x1, x2) = if d == 0 { (0, 0) } else { (-half, half) };
    if x2 < x1 {
        return Err(Error::InvalidInput(format!("scale {n_scale} leaves an empty window")));
    }
    let bloch = build_bloch(v, alpha, pair, x1, x2)?;
    let u_floor = strip_floor(&bloch.u, r_max);
    if u_floor < VECTOR_FLOOR {
        return Err(Error::VectorVanishes { floor: u_floor });
    }
    let floor_margin = u_floor.ln() + 2.0 * p.eta * n_scale as f64;
    let g_norm = bloch.g.band_norm(r_max)?.grid;
    let reach = (x2 - x1) / 2;
    let inside: Vec<i64> = res.indices().into_iter().filter(|n| n.abs() <= reach).collect();
    let beyond = res.indices().into_iter().map(|n| n.unsigned_abs()).filter(|&n| n as i64 > reach).min();
    let horizon_limited = beyond.is_none();

    let (w, target, twist, det_floor, det_drift, complex_error, parabolic_c, parabolic_sign, target_angle) =
        if !parabolic {
            let comp = complete_to_sl2(&bloch.u, r_max)?;
            let m = comp.m.clone();
            let c2 = |z: Complex64| {
                inverse_c2(&m.eval(z + alpha)) * a_e(v, energy, z) * m.eval(z)
            };
            let span_m = m.entries.iter().flatten().map(span).max().unwrap();
            let grid = grid_for(2 * span_m + d);
            let b = strip_series(|m, y| line_points(m, y).map(|z| c2(z)[(0, 1)]).collect(), grid, false, r_max);
            let cutoff = beyond.unwrap_or(p.horizon);
            let elim = eliminate_offdiag(&b, theta, alpha, cutoff)?;
            let tmat = TorusMatrix::from_columns(
                [F::constant(ONE), F::zero()],
                [elim.tau.clone(), F::constant(ONE)],
            );
            let bc = m.mul(&tmat).trim(TRIM);
            let diag = Matrix2::new(cexp_i2pi(theta), ZERO, ZERO, cexp_i2pi(-theta));
            let complex_error = conjugation_error(v, alpha, energy, &bc, &diag, r_max, STRIP_GRID);
            let twist = inside.iter().cloned().max_by_key(|n| n.abs()).unwrap_or(0);
            let re = realify(&bloch.u, twist, r_max)?;
            let mut ang = theta - twist as f64 * alpha / 2.0;
            if re.flipped {
                ang = -ang;
            }
            (re.w, rotation(ang), twist, re.det_floor, re.det_drift, Some(complex_error), None, None, Some(frac(ang)))
        } else {
            let n = closest_resonance(theta, alpha);
            let ut: Vec<F> = bloch.u.iter().map(|f| f.twist(n)).collect();
            // Constant phase making the twisted vector real on the axis.
            let m = grid_for(ut.iter().map(span).max().unwrap());
            let mut acc = ZERO;
            for k in 0..m {
                let x = k as f64 / m as f64;
                let (a, b) = (ut[0].eval_real(x), ut[1].eval_real(x));
                acc += a * a + b * b;
            }
            let rot = Complex64::from_polar(1.0, -0.5 * acc.arg());
            let vr: Vec<F> = ut
                .iter()
                .map(|f| {
                    let g = f.scale(rot);
                    g.add(&g.conj_reflect()).scale(ONE * 0.5).trim(TRIM)
                })
                .collect();
            let q = vr[0].mul(&vr[0]).add(&vr[1].mul(&vr[1])).trim(TRIM);
            let qfloor = strip_points(r_max, 256).into_iter().map(|z| q.eval(z).norm()).fold(f64::INFINITY, f64::min);
            if qfloor < DET_FLOOR {
                return Err(Error::DeterminantVanishes { floor: qfloor });
            }
            let inv_q = newton_polish(&q, compose(&q, |x| ONE / x, false, r_max), false);
            let u1 = TorusMatrix::from_columns(
                [vr[0].clone(), vr[1].clone()],
                [vr[1].mul(&inv_q).scale(-ONE).trim(TRIM), vr[0].mul(&inv_q).trim(TRIM)],
            );
            let c1 = |z: Complex64| {
                inverse_c2(&u1.eval(z + alpha)) * a_e(v, energy, z) * u1.eval(z)
            };
            let sign = c1(ZERO)[(0, 0)].re.signum();
            let span_u = u1.entries.iter().flatten().map(span).max().unwrap();
            let grid = grid_for(2 * span_u + d);
            let phi1 =
                strip_series(|m, y| line_points(m, y).map(|z| c1(z)[(0, 1)] * sign).collect(), grid, false, r_max);
            let sol = cohomological_solve(&phi1, alpha)?;
            let tmat = TorusMatrix::from_columns([F::constant(ONE), F::zero()], [sol.phi.clone(), F::constant(ONE)]);
            let w = u1.mul(&tmat).trim(TRIM);
            let c = sol.mean.re;
            let target = Matrix2::new(ONE, ONE * c, ZERO, ONE) * Complex64::new(sign, 0.0);
            let det_drift = strip_points(r_max, 128)
                .into_iter()
                .map(|z| {
                    let e = w.eval(z);
                    (e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)] - ONE).norm()
                })
                .fold(0.0, f64::max);
            (w, target, n, qfloor, det_drift, None, Some(c), Some(sign), None)
        };

    let mut radii = p.r_list.clone();
    radii.push(0.0);
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let errors: Vec<StripError> = radii
        .iter()
        .map(|&r| StripError { r, error: conjugation_error(v, alpha, energy, &w, &target, r, STRIP_GRID) })
        .collect();
    let error_0_coarse = conjugation_error(v, alpha, energy, &w, &target, 0.0, 256);
    let degree = (2.0 * column_turns(&w, 4096)).round() as i64;
    let (rho_conjugated, bookkeeping) = if parabolic {
        // Parabolic targets have rotation number 0 or 1/2.
        let pred = rho - degree as f64 * alpha / 2.0;
        let r0 = if parabolic_sign == Some(-1.0) { 0.5 } else { 0.0 };
        (r0, dist_z(pred - r0).min(dist_z(pred + r0)))
    } else {
        let rc = conjugated_rho(v, alpha, energy, &w, p.conjugated_rho_iterations)?;
        let pred = rho - degree as f64 * alpha / 2.0;
        (rc, dist_z(rc - pred).min(dist_z(rc + pred)))
    };
    Ok(ConjugationReport {
        scale_index: 0,
        scale: n_scale,
        window: (x1, x2),
        energy,
        theta,
        branch: if parabolic { Branch::Parabolic } else { Branch::Rotation },
        target_angle,
        parabolic_c,
        parabolic_sign,
        twist,
        b: w,
        errors,
        error_0_coarse,
        complex_error,
        degree,
        det_floor,
        det_drift,
        bloch_residual: bloch.residual,
        g_norm,
        u_floor,
        floor_margin,
        eta: p.eta,
        rho_energy: rho,
        rho_conjugated,
        rotation_bookkeeping_error: bookkeeping,
        horizon_limited,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub r: f64,
    /// (n, max_{m ≤ n} sup over the sampled strip of ‖(A_E)_m‖).
    pub checkpoints: Vec<(usize, f64)>,
    /// Slope of ln(max norm) against ln n.
    pub exponent: f64,
}

/// Growth of ‖(A_E)_n‖_r sampled on Im z = ±r.
pub fn polynomial_growth(
    v: &TrigPolynomial,
    alpha: f64,
    energy: f64,
    r: f64,
    n_max: usize,
    points: usize,
) -> Result<GrowthReport> {
    if n_max < 200 {
        return Err(Error::InvalidInput("n_max must be at least 200".into()));
    }
    let zs: Vec<Complex64> = strip_lines(r)
        .into_iter()
        .flat_map(|y| (0..points).map(move |k| Complex64::new(k as f64 / points as f64, y)))
        .collect();
    let mut marks: Vec<usize> = Vec::new();
    let mut n = 100usize;
    while n <= n_max {
        marks.push(n);
        n = (n as f64 * 1.5).ceil() as usize;
    }
    let mut products: Vec<Matrix2<Complex64>> = vec![Matrix2::identity(); zs.len()];
    let mut logs = vec![0.0f64; zs.len()];
    let mut running: f64 = 0.0;
    let mut checkpoints = Vec::new();
    let mut mi = 0;
    for step in 1..=n_max {
        for (k, z) in zs.iter().enumerate() {
            let a = a_e(v, energy, z + alpha * (step - 1) as f64);
            let mut pm = a * products[k];
            let s = pm.iter().map(|c| c.norm()).fold(0.0, f64::max);
            pm /= Complex64::new(s, 0.0);
            logs[k] += s.ln();
            products[k] = pm;
            running = running.max(logs[k] + norm2_c2(&pm).ln());
        }
        if mi < marks.len() && step == marks[mi] {
            checkpoints.push((step, running.exp()));
            mi += 1;
        }
    }
    let xs: Vec<f64> = checkpoints.iter().map(|c| (c.0 as f64).ln()).collect();
    let ys: Vec<f64> = checkpoints.iter().map(|c| c.1.ln()).collect();
    let exponent = linear_fit(&xs, &ys).0;
    Ok(GrowthReport { r, checkpoints, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn elimination_single_mode() {
        let b = F::constant(c(1.0, 0.5));
        let e = eliminate_offdiag(&b, 0.25, 0.618, 5).unwrap();
        let expect = I * b.coeff(0) / 2.0;
        assert!((e.tau.coeff(0) - expect).norm() < 1e-15);
        assert!(e.identity_error < 1e-15);
    }

    #[test]
    fn elimination_high_modes_untouched() {
        let b = F::new(6, vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let e = eliminate_offdiag(&b, 0.1, 0.618, 6).unwrap();
        assert!(e.tau.coeffs.iter().all(|x| *x == ZERO));
        assert_eq!(e.tail.coeff(6), c(1.0, 0.0));
        assert_eq!(e.tail.coeff(7), c(0.0, 2.0));
    }

    #[test]
    fn cohomological_constant_and_mode() {
        let s = cohomological_solve(&F::constant(c(0.7, 0.0)), 0.618).unwrap();
        assert!(s.phi.coeffs.iter().all(|x| x.norm() == 0.0));
        assert_eq!(s.mean, c(0.7, 0.0));
        let alpha = (5f64.sqrt() - 1.0) / 2.0;
        let s = cohomological_solve(&F::monomial(1, c(1.0, -1.0)), alpha).unwrap();
        let expect = c(1.0, -1.0) / (cexp_i2pi(alpha) - ONE);
        assert!((s.phi.coeff(1) - expect).norm() < 1e-15);
    }

    #[test]
    fn completion_of_constant_vector() {
        let u = [F::constant(ONE), F::zero()];
        let comp = complete_to_sl2(&u, 0.1).unwrap();
        let m = comp.m.eval(c(0.3, 0.05));
        assert!((m - Matrix2::identity()).norm() < 1e-14);
        let v = [F::monomial(1, ONE), F::constant(ONE)];
        let comp = complete_to_sl2(&v, 0.1).unwrap();
        assert!(comp.det_error < 1e-8, "{}", comp.det_error);
    }

    #[test]
    fn vanishing_vector_rejected() {
        let u = [F::constant(c(1e-12, 0.0)), F::zero()];
        assert!(matches!(complete_to_sl2(&u, 0.1), Err(Error::VectorVanishes { .. })));
    }

    #[test]
    fn realify_of_real_sl2() {
        // U = (1, −i)·e^{...}: S = (1, 0), T = (0, 1) gives W = identity.
        let u = [F::constant(ONE), F::constant(-I)];
        let re = realify(&u, 0, 0.1).unwrap();
        let w = re.w.eval(c(0.2, 0.03));
        assert!((w - Matrix2::identity()).norm() < 1e-14);
        assert!(re.det_drift < 1e-14);
    }
}
