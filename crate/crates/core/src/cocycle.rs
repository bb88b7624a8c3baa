//! Schrödinger and dual finite-range cocycles, transfer products, Lyapunov
//! spectra at strip height ε, acceleration and the fibered rotation number.

use crate::error::{Error, Result};
use crate::linalg::{frob, norm2};
use crate::numeric::{dist_z, linear_fit, mean_std, two_cos, TAU};
use crate::potential::TrigPolynomial;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Re-orthonormalization cadence of the QR deflation.
pub const QR_CADENCE: usize = 20;

pub type MatrixMap = Arc<dyn Fn(Complex64) -> DMatrix<Complex64> + Send + Sync>;

#[derive(Clone)]
pub enum CocycleKind {
    Schrodinger,
    DualFiniteRange,
    Generic { dim: usize, map: MatrixMap },
}

impl std::fmt::Debug for CocycleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CocycleKind::Schrodinger => write!(f, "Schrodinger"),
            CocycleKind::DualFiniteRange => write!(f, "DualFiniteRange"),
            CocycleKind::Generic { dim, .. } => write!(f, "Generic({dim}x{dim})"),
        }
    }
}

/// A cocycle (α, A) with A analytic on a strip around the real torus.
#[derive(Debug, Clone)]
pub struct QuasiperiodicCocycle {
    pub alpha: f64,
    pub kind: CocycleKind,
    pub potential: TrigPolynomial,
    pub energy: f64,
    /// Constant part of the dual first row, (1/V_d)(−V_{d−1}, …, E−V_0, …, −V_{−d}).
    dual_row: Vec<Complex64>,
}

/// A_E(z) = [[E − V(z), −1], [1, 0]].
pub fn schrodinger_cocycle(v: &TrigPolynomial, energy: f64, alpha: f64) -> QuasiperiodicCocycle {
    QuasiperiodicCocycle {
        alpha,
        kind: CocycleKind::Schrodinger,
        potential: v.clone(),
        energy,
        dual_row: Vec::new(),
    }
}

/// The 2d×2d companion cocycle of the dual operator, acting on states
/// (u(n+d−1), …, u(n−d)).
pub fn dual_cocycle(v: &TrigPolynomial, energy: f64, alpha: f64) -> Result<QuasiperiodicCocycle> {
    let d = v.degree();
    let vd = v.leading();
    if d == 0 || vd.norm() < 1e-14 {
        return Err(Error::DegenerateLeadingCoefficient { modulus: vd.norm() });
    }
    let mut row = Vec::with_capacity(2 * d);
    for k in (1..d as i64).rev() {
        row.push(-v.coeff(k) / vd);
    }
    row.push((Complex64::new(energy, 0.0) - v.coeff(0)) / vd);
    for k in 1..=d as i64 {
        row.push(-v.coeff(-k) / vd);
    }
    Ok(QuasiperiodicCocycle {
        alpha,
        kind: CocycleKind::DualFiniteRange,
        potential: v.clone(),
        energy,
        dual_row: row,
    })
}

/// A cocycle given by an arbitrary matrix map.
pub fn generic_cocycle(alpha: f64, dim: usize, map: MatrixMap) -> QuasiperiodicCocycle {
    QuasiperiodicCocycle {
        alpha,
        kind: CocycleKind::Generic { dim, map },
        potential: TrigPolynomial::zero(),
        energy: 0.0,
        dual_row: Vec::new(),
    }
}

/// Product A_n(z) = M·exp(log_scale) with ‖M‖_F = 1 (identity when n = 0).
#[derive(Debug, Clone)]
pub struct TransferProduct {
    pub matrix: DMatrix<Complex64>,
    pub log_scale: f64,
}

impl TransferProduct {
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        &self.matrix * Complex64::new(self.log_scale.exp(), 0.0)
    }
}

impl QuasiperiodicCocycle {
    pub fn dim(&self) -> usize {
        match &self.kind {
            CocycleKind::Schrodinger => 2,
            CocycleKind::DualFiniteRange => 2 * self.potential.degree(),
            CocycleKind::Generic { dim, .. } => *dim,
        }
    }

    /// Number of non-negative exponents tracked (half the dimension).
    pub fn half_dim(&self) -> usize {
        (self.dim() / 2).max(1)
    }

    pub fn fill(&self, z: Complex64, out: &mut DMatrix<Complex64>) {
        match &self.kind {
            CocycleKind::Schrodinger => {
                out[(0, 0)] = Complex64::new(self.energy, 0.0) - self.potential.eval(z);
                out[(0, 1)] = -C1;
                out[(1, 0)] = C1;
                out[(1, 1)] = C0;
            }
            CocycleKind::DualFiniteRange => {
                let d = self.potential.degree();
                out.fill(C0);
                for (j, v) in self.dual_row.iter().enumerate() {
                    out[(0, j)] = *v;
                }
                out[(0, d - 1)] -= two_cos(z) / self.potential.leading();
                for i in 1..2 * d {
                    out[(i, i - 1)] = C1;
                }
            }
            CocycleKind::Generic { map, .. } => out.copy_from(&map(z)),
        }
    }

    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        self.fill(z, &mut m);
        m
    }

    pub fn eval_real(&self, x: f64) -> DMatrix<Complex64> {
        self.eval(Complex64::new(x, 0.0))
    }

    /// A(z)^{-1}, with the condition-number guard of the negative-iterate branch.
    pub fn inverse_at(&self, z: Complex64, step: i64) -> Result<DMatrix<Complex64>> {
        let a = self.eval(z);
        if let CocycleKind::Schrodinger = self.kind {
            let mut inv = DMatrix::zeros(2, 2);
            inv[(0, 1)] = C1;
            inv[(1, 0)] = -C1;
            inv[(1, 1)] = a[(0, 0)];
            let cond = frob(&a) * frob(&inv) / 2.0;
            if cond > 1e14 {
                return Err(Error::SingularInverse { step, condition: cond });
            }
            return Ok(inv);
        }
        let inv = a
            .clone()
            .try_inverse()
            .ok_or(Error::SingularInverse { step, condition: f64::INFINITY })?;
        let cond = frob(&a) * frob(&inv) / a.nrows() as f64;
        if cond > 1e14 {
            return Err(Error::SingularInverse { step, condition: cond });
        }
        Ok(inv)
    }

    /// A_n(z): A(z+(n−1)α)⋯A(z) for n > 0, A(z+nα)^{-1}⋯A(z−α)^{-1} for n < 0.
    pub fn transfer_product(&self, z: Complex64, n: i64) -> Result<TransferProduct> {
        let dim = self.dim();
        let mut m = DMatrix::<Complex64>::identity(dim, dim);
        let mut log_scale = 0.0;
        if n == 0 {
            return Ok(TransferProduct { matrix: m, log_scale });
        }
        let mut a = DMatrix::zeros(dim, dim);
        let mut tmp = DMatrix::zeros(dim, dim);
        for t in 0..n.unsigned_abs() as i64 {
            if n > 0 {
                self.fill(z + self.alpha * t as f64, &mut a);
            } else {
                a = self.inverse_at(z - self.alpha * (t + 1) as f64, -(t + 1))?;
            }
            tmp.gemm(C1, &a, &m, C0);
            std::mem::swap(&mut m, &mut tmp);
            let s = frob(&m);
            if s == 0.0 || !s.is_finite() {
                return Err(Error::SingularInverse { step: t, condition: f64::INFINITY });
            }
            m /= Complex64::new(s, 0.0);
            log_scale += s.ln();
        }
        Ok(TransferProduct { matrix: m, log_scale })
    }

    /// Per-sample sums of ln|R_ii| from QR deflation over N steps, divided by N.
    fn qr_exponents(&self, z0: Complex64, n: usize) -> Vec<f64> {
        let dim = self.dim();
        let h = self.half_dim();
        let mut q = DMatrix::<Complex64>::identity(dim, h);
        let mut a = DMatrix::zeros(dim, dim);
        let mut tmp = DMatrix::zeros(dim, h);
        let mut sums = vec![0.0; h];
        for t in 0..n {
            self.fill(z0 + self.alpha * t as f64, &mut a);
            tmp.gemm(C1, &a, &q, C0);
            std::mem::swap(&mut q, &mut tmp);
            if (t + 1) % QR_CADENCE == 0 || t + 1 == n {
                let qr = q.clone().qr();
                let r = qr.r();
                for (i, s) in sums.iter_mut().enumerate() {
                    *s += r[(i, i)].norm().ln();
                }
                q = qr.q();
            }
        }
        sums.iter().map(|s| s / n as f64).collect()
    }
}

/// Which adjoint-type identity the dual cocycle satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymplecticConvention {
    Transpose,
    Adjoint,
}

/// The form Ω = [[0, −C*], [C, 0]] with C upper-triangular Toeplitz,
/// V_d on the diagonal and V_1 in the top-right corner.
pub fn symplectic_form(v: &TrigPolynomial) -> DMatrix<Complex64> {
    let d = v.degree();
    let mut c = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            c[(i, j)] = v.coeff((d - (j - i)) as i64);
        }
    }
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    omega.view_mut((0, d), (d, d)).copy_from(&(-c.adjoint()));
    omega.view_mut((d, 0), (d, d)).copy_from(&c);
    omega
}

/// Relative defects ‖LᵀΩL − Ω‖ and ‖L*ΩL − Ω‖ at real phase x.
pub fn symplectic_defects(c: &QuasiperiodicCocycle, x: f64) -> (f64, f64) {
    let l = c.eval_real(x);
    let omega = symplectic_form(&c.potential);
    let scale = frob(&omega) * frob(&l).powi(2);
    let t = frob(&(l.transpose() * &omega * &l - &omega)) / scale;
    let a = frob(&(l.adjoint() * &omega * &l - &omega)) / scale;
    (t, a)
}

/// Tests both conventions at `trials` random real phases; returns the one that
/// holds to 1e−10 everywhere (adjoint preferred when both do).
pub fn probe_symplectic(
    c: &QuasiperiodicCocycle,
    seed: u64,
    trials: usize,
) -> Option<SymplecticConvention> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_t, mut worst_a) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let (t, a) = symplectic_defects(c, rng.gen::<f64>());
        worst_t = worst_t.max(t);
        worst_a = worst_a.max(a);
    }
    if worst_a < 1e-10 {
        Some(SymplecticConvention::Adjoint)
    } else if worst_t < 1e-10 {
        Some(SymplecticConvention::Transpose)
    } else {
        None
    }
}

/// Non-negative half of the Lyapunov spectrum at strip height ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    pub epsilon: f64,
    /// Raw exponents γ_1 ≥ … ≥ γ_h, nats per iterate.
    pub exponents: Vec<f64>,
    /// L^k = γ_1 + … + γ_k.
    pub partial_sums: Vec<f64>,
    /// Bootstrap standard error of each partial sum.
    pub stderr: Vec<f64>,
    pub iterations: usize,
    pub theta_samples: usize,
    pub theta_offset: f64,
}

impl LyapunovSpectrum {
    /// max(γ, 0) componentwise.
    pub fn floored(&self) -> Vec<f64> {
        self.exponents.iter().map(|g| g.max(0.0)).collect()
    }

    /// L^k for k in 1..=h.
    pub fn l(&self, k: usize) -> f64 {
        self.partial_sums[k - 1]
    }
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Lyapunov spectrum by QR deflation averaged over a shifted uniform θ-grid.
pub fn lyapunov_spectrum(
    c: &QuasiperiodicCocycle,
    epsilon: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<LyapunovSpectrum> {
    if n < 100 || samples < 1 {
        return Err(Error::InvalidInput("lyapunov needs N ≥ 100 and samples ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.gen();
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let theta = (s as f64 + offset) / samples as f64;
            c.qr_exponents(Complex64::new(theta, epsilon), n)
        })
        .collect();
    let h = c.half_dim();
    let mut exponents = vec![0.0; h];
    for row in &per_sample {
        for (e, v) in exponents.iter_mut().zip(row) {
            *e += v / samples as f64;
        }
    }
    let partial: Vec<Vec<f64>> = per_sample
        .iter()
        .map(|row| row.iter().scan(0.0, |acc, v| { *acc += v; Some(*acc) }).collect())
        .collect();
    let partial_sums: Vec<f64> =
        exponents.iter().scan(0.0, |acc, v| { *acc += v; Some(*acc) }).collect();
    let mut stderr = vec![0.0; h];
    if samples > 1 {
        let mut boot = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let mut means = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); h];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let mut acc = vec![0.0; h];
            for _ in 0..samples {
                let i = boot.gen_range(0..samples);
                for (a, v) in acc.iter_mut().zip(&partial[i]) {
                    *a += v;
                }
            }
            for (m, a) in means.iter_mut().zip(&acc) {
                m.push(a / samples as f64);
            }
        }
        for (s, m) in stderr.iter_mut().zip(&means) {
            *s = mean_std(m).1;
        }
    }
    Ok(LyapunovSpectrum {
        epsilon,
        exponents,
        partial_sums,
        stderr,
        iterations: n,
        theta_samples: samples,
        theta_offset: offset,
    })
}

/// Result of the ε-slope fit of L^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelerationFit {
    pub k: usize,
    pub eps_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// dL^k/dε from least squares.
    pub slope: f64,
    /// slope / 2π.
    pub omega_raw: f64,
    pub omega: i64,
    /// Max deviation of L^k(ε) from the fitted line, nats.
    pub residual: f64,
    /// Set when the residual exceeds 0.05 (a regularity breakpoint inside the grid).
    pub non_affine_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridParams {
    pub iterations: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { iterations: 10_000, samples: 64, seed: 0 }
    }
}

pub fn acceleration(
    c: &QuasiperiodicCocycle,
    k: usize,
    eps_grid: &[f64],
    p: GridParams,
) -> Result<AccelerationFit> {
    if k < 1 || k > c.half_dim() {
        return Err(Error::InvalidInput(format!("k = {k} outside 1..={}", c.half_dim())));
    }
    if eps_grid.iter().filter(|&&e| e > 0.0).count() < 3 {
        return Err(Error::InvalidInput("acceleration needs ≥ 3 positive ε".into()));
    }
    let specs = eps_grid
        .iter()
        .map(|&e| lyapunov_spectrum(c, e, p.iterations, p.samples, p.seed))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = specs.iter().map(|s| s.l(k)).collect();
    let stderr: Vec<f64> = specs.iter().map(|s| s.stderr[k - 1]).collect();
    let (slope, _, residual) = linear_fit(eps_grid, &values);
    let omega_raw = slope / TAU;
    Ok(AccelerationFit {
        k,
        eps_grid: eps_grid.to_vec(),
        values,
        stderr,
        slope,
        omega_raw,
        omega: omega_raw.round() as i64,
        residual,
        non_affine_warning: residual > 0.05,
    })
}

/// Threshold below which L_ε counts as zero.
pub const SUBCRITICAL_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalRadius {
    /// Largest ε verified with L_ε < threshold.
    pub h: f64,
    /// Smallest ε verified with L_ε ≥ threshold (None when capped).
    pub h_upper: Option<f64>,
    pub l0: f64,
    /// True when every grid point was subcritical (h is only a lower bound).
    pub capped: bool,
    pub iterations: usize,
    pub samples: usize,
}

/// Numeric subcritical radius h(E) of a Schrödinger cocycle.
pub fn subcritical_radius(
    c: &QuasiperiodicCocycle,
    eps_grid: &[f64],
    strip_bound: Option<f64>,
    p: GridParams,
) -> Result<SubcriticalRadius> {
    let l = |e: f64| -> Result<f64> {
        Ok(lyapunov_spectrum(c, e, p.iterations, p.samples, p.seed)?.l(1))
    };
    let l0 = l(0.0)?;
    if l0 >= SUBCRITICAL_THRESHOLD {
        return Err(Error::NotSubcritical { l0 });
    }
    let mut grid: Vec<f64> = eps_grid
        .iter()
        .cloned()
        .filter(|&e| e > 0.0 && strip_bound.map_or(true, |b| e <= b))
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut lo = 0.0;
    let mut hi = None;
    for &e in &grid {
        if l(e)? < SUBCRITICAL_THRESHOLD {
            lo = e;
        } else {
            hi = Some(e);
            break;
        }
    }
    let Some(mut hi_v) = hi else {
        let cap = strip_bound.map_or(lo, |b| lo.min(b));
        return Ok(SubcriticalRadius {
            h: cap,
            h_upper: None,
            l0,
            capped: true,
            iterations: p.iterations,
            samples: p.samples,
        });
    };
    while hi_v - lo > 1e-3 {
        let mid = 0.5 * (lo + hi_v);
        if l(mid)? < SUBCRITICAL_THRESHOLD {
            lo = mid;
        } else {
            hi_v = mid;
        }
    }
    Ok(SubcriticalRadius {
        h: lo,
        h_upper: Some(hi_v),
        l0,
        capped: false,
        iterations: p.iterations,
        samples: p.samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationNumber {
    pub rho: f64,
    pub error_bound: f64,
    pub iterations: usize,
    pub method: String,
}

/// Fibered rotation number of a real 2×2 cocycle.
///
/// Schrödinger cocycles use the Sturm count (sign changes of the solution
/// with u_{−1} = 0, u_0 = 1), which lands in [0, 1/2]; other real 2×2 maps use
/// the Birkhoff average of principal angle increments, reported in [0, 1).
pub fn rotation_number(c: &QuasiperiodicCocycle, n: usize, x0: f64) -> Result<RotationNumber> {
    if c.dim() != 2 {
        return Err(Error::InvalidInput("rotation number needs a 2×2 cocycle".into()));
    }
    match c.kind {
        CocycleKind::Schrodinger => {
            let (mut u_prev, mut u) = (0.0f64, 1.0f64);
            let mut changes = 0usize;
            for t in 0..n {
                let x = x0 + c.alpha * t as f64;
                let next = (c.energy - c.potential.eval_real(x)) * u - u_prev;
                if (next < 0.0) != (u < 0.0) || next == 0.0 {
                    changes += 1;
                }
                u_prev = u;
                u = next;
                let s = u.abs().max(u_prev.abs());
                if s > 1e100 || s < 1e-100 {
                    u /= s;
                    u_prev /= s;
                }
            }
            Ok(RotationNumber {
                rho: (changes as f64 / (2.0 * n as f64)).clamp(0.0, 0.5),
                error_bound: 1.0 / n as f64,
                iterations: n,
                method: "sturm".into(),
            })
        }
        _ => {
            let w = column_winding(&|x| c.eval_real(x), 512);
            if w != 0 {
                return Err(Error::InvalidInput(format!(
                    "cocycle not homotopic to the identity (winding {w})"
                )));
            }
            let mut v = [1.0f64, 0.0];
            let mut total = 0.0;
            for t in 0..n {
                let m = c.eval_real(x0 + c.alpha * t as f64);
                let nv = [
                    m[(0, 0)].re * v[0] + m[(0, 1)].re * v[1],
                    m[(1, 0)].re * v[0] + m[(1, 1)].re * v[1],
                ];
                let cross = v[0] * nv[1] - v[1] * nv[0];
                let dot = v[0] * nv[0] + v[1] * nv[1];
                total += cross.atan2(dot);
                let s = nv[0].hypot(nv[1]);
                v = [nv[0] / s, nv[1] / s];
            }
            Ok(RotationNumber {
                rho: (total / (TAU * n as f64)).rem_euclid(1.0),
                error_bound: 1.0 / n as f64,
                iterations: n,
                method: "angle-average".into(),
            })
        }
    }
}

/// Number of turns of the first column of a real-on-the-axis matrix map over [0, 1].
pub fn column_winding(f: &dyn Fn(f64) -> DMatrix<Complex64>, grid: usize) -> i64 {
    let angle = |x: f64| {
        let m = f(x);
        m[(1, 0)].re.atan2(m[(0, 0)].re)
    };
    let mut total = 0.0;
    let mut prev = angle(0.0);
    for i in 1..=grid {
        let a = angle(i as f64 / grid as f64);
        let mut da = a - prev;
        da -= TAU * (da / TAU).round();
        total += da;
        prev = a;
    }
    (total / TAU).round() as i64
}

/// Smallest ‖2ρ − kα‖ over |k| ≤ kmax, with the minimizing k.
pub fn gap_label(rho: f64, alpha: f64, kmax: i64) -> (i64, f64) {
    (-kmax..=kmax)
        .map(|k| (k, dist_z(2.0 * rho - k as f64 * alpha)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Largest singular value of a matrix (re-exported for callers working with products).
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    norm2(m)
}
