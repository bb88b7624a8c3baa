//! Eigenpairs of large dual sections with tails resolved far below the
//! floating-point floor, resonance-masked decay fits, the scale bookkeeping
//! used between consecutive resonances, and (ξ, m)-regularity.

use crate::arithmetic::ResonanceSet;
use crate::error::{Error, Result};
use crate::linalg::{banded_sturm_count, kth_eigenvalue};
use crate::numeric::{frac, wrap_phase};
use crate::operators::{greens, operator_entry, truncate};
use crate::potential::TrigPolynomial;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Fraction of the half-width kept as bulk in decay fits.
pub const BULK_FRACTION: f64 = 0.8;

/// Eigenpair of the section on [−sites, sites], re-indexed so that the
/// largest entry sits at 0 with u_0 = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub energy: f64,
    pub theta_input: f64,
    /// θ + shift·α mod 1, the phase at which u solves L u = E u around 0.
    pub theta: f64,
    pub sites: usize,
    /// Original index of the peak.
    pub shift: i64,
    /// u is stored for j ∈ [lo, hi].
    pub lo: i64,
    pub hi: i64,
    pub u: Vec<Complex64>,
    /// ln|u_j|, valid after u_j underflows.
    pub log_abs: Vec<f64>,
    /// ‖(L − E)u‖/‖u‖ for the directly computed vector.
    pub residual: f64,
    /// |E − E_target|.
    pub distance: f64,
}

impl Eigenpair {
    pub fn u_at(&self, j: i64) -> Complex64 {
        if j < self.lo || j > self.hi {
            return ZERO;
        }
        self.u[(j - self.lo) as usize]
    }

    pub fn log_abs_at(&self, j: i64) -> f64 {
        if j < self.lo || j > self.hi {
            return f64::NEG_INFINITY;
        }
        self.log_abs[(j - self.lo) as usize]
    }

    /// Is j (re-indexed) at most BULK_FRACTION·sites from the section centre?
    pub fn in_bulk(&self, j: i64) -> bool {
        ((j + self.shift).abs() as f64) <= BULK_FRACTION * self.sites as f64
    }
}

fn section_bound(v: &TrigPolynomial) -> f64 {
    v.l1_norm() + 3.0
}

/// Eigenvalue of the section on [−sites, sites] nearest `target`.
pub fn nearest_eigenvalue(v: &TrigPolynomial, alpha: f64, theta: f64, target: f64, sites: usize) -> f64 {
    let n = 2 * sites + 1;
    let x1 = -(sites as i64);
    let th = Complex64::new(theta, 0.0);
    let entry = |i: usize, j: usize| operator_entry(v, alpha, th, ZERO, x1 + i as i64, x1 + j as i64);
    let count = |s: f64| banded_sturm_count(n, v.degree(), entry, s);
    let b = section_bound(v);
    let k = count(target);
    let mut best = f64::NAN;
    for idx in [k.checked_sub(1), (k < n).then_some(k)].into_iter().flatten() {
        let lam = kth_eigenvalue(count, idx, -b, b);
        if best.is_nan() || (lam - target).abs() < (best - target).abs() {
            best = lam;
        }
    }
    best
}

pub fn eigenpair_near(v: &TrigPolynomial, alpha: f64, theta: f64, target: f64, sites: usize) -> Result<Eigenpair> {
    if sites < 500 {
        return Err(Error::InvalidInput("eigenpair_near needs sites ≥ 500".into()));
    }
    let d = v.degree();
    if d == 0 {
        return Err(Error::InvalidInput("constant potential has no banded section".into()));
    }
    let lam = nearest_eigenvalue(v, alpha, theta, target, sites);
    let tol = 10.0 / sites as f64;
    if (lam - target).abs() > tol {
        return Err(Error::NoEigenvalueWithin { target, nearest: lam, tolerance: tol });
    }
    let x1 = -(sites as i64);
    let x2 = sites as i64;
    let th = Complex64::new(theta, 0.0);
    let op = truncate(v, alpha, th, x1, x2)?;
    let n = op.len();
    let raw = inverse_iteration(&op, lam);
    let a = op.shifted(Complex64::new(lam, 0.0));
    let r = a.matvec(&raw);
    let residual = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        / raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let (pi, _) = raw
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let p = x1 + pi as i64;
    let u0 = raw[pi];
    let mut log_abs: Vec<f64> = raw.iter().map(|z| (z / u0).norm().ln()).collect();
    let mut phase: Vec<f64> = raw.iter().map(|z| (z / u0).arg()).collect();

    let entry = |a: i64, b: i64| operator_entry(v, alpha, th, Complex64::new(lam, 0.0), a, b);
    for (s, edge) in [(1i64, x2), (-1i64, x1)] {
        let known: Vec<Complex64> = (0..2 * d as i64)
            .map(|t| {
                let q = p + s * t;
                if q < x1 || q > x2 {
                    ZERO
                } else {
                    raw[(q - x1) as usize] / u0
                }
            })
            .collect();
        if let Some(tail) = tail_from_boundary(&entry, p, s, edge, d, &known) {
            for (t, (la, ph)) in tail.into_iter().enumerate().skip(2 * d) {
                let q = (p + s * t as i64 - x1) as usize;
                log_abs[q] = la;
                phase[q] = ph;
            }
        }
    }
    let u: Vec<Complex64> = log_abs
        .iter()
        .zip(&phase)
        .map(|(&la, &ph)| Complex64::from_polar(la.exp(), ph))
        .collect();
    debug_assert_eq!(u.len(), n);
    Ok(Eigenpair {
        energy: lam,
        theta_input: theta,
        theta: frac(theta + p as f64 * alpha),
        sites,
        shift: p,
        lo: x1 - p,
        hi: x2 - p,
        u,
        log_abs,
        residual,
        distance: (lam - target).abs(),
    })
}

fn inverse_iteration(op: &crate::operators::TruncatedOperator, lam: f64) -> Vec<Complex64> {
    let n = op.len();
    let scale = 1.0 + lam.abs();
    let mut shift = lam;
    let mut lu = op.shifted(Complex64::new(shift, 0.0)).lu();
    if lu.is_singular() {
        shift += 1e-14 * scale;
        lu = op.shifted(Complex64::new(shift, 0.0)).lu();
    }
    let mut x: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0)).collect();
    for _ in 0..3 {
        x = lu.solve(&x);
        let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|z| *z /= nrm);
    }
    x
}

/// Solution of the row equations between the peak p and a Dirichlet edge,
/// as (ln|g_t|, arg g_t) for g_t = u(p + s·t), t = 0..=|edge − p|.
/// The d-dimensional space of solutions vanishing beyond the edge is carried
/// inward with QR renormalization and matched to the 2d known values at the peak.
fn tail_from_boundary(
    entry: &dyn Fn(i64, i64) -> Complex64,
    p: i64,
    s: i64,
    edge: i64,
    d: usize,
    known: &[Complex64],
) -> Option<Vec<(f64, f64)>> {
    let big_t = (edge - p) * s;
    let w = 2 * d;
    if big_t < w as i64 {
        return None;
    }
    let big_t = big_t as usize;
    let a = |t: usize, k: i64| {
        let q = p + s * t as i64;
        entry(q, q + s * k)
    };
    // bases[w] spans windows (g_{w−d+1}, …, g_{w+d}); rs[t] maps window t−1 to t.
    let mut bases: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(0, 0); big_t + 1];
    let mut rs: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(0, 0); big_t + 1];
    let mut b = DMatrix::<Complex64>::zeros(w, d);
    for i in 0..d {
        b[(i, i)] = Complex64::new(1.0, 0.0);
    }
    bases[big_t] = b;
    for t in (d..=big_t).rev() {
        let cur = &bases[t];
        let mut raw = DMatrix::<Complex64>::zeros(w, d);
        let lead = a(t, -(d as i64));
        for c in 0..d {
            let mut acc = ZERO;
            for k in -(d as i64) + 1..=d as i64 {
                acc += a(t, k) * cur[((k + d as i64 - 1) as usize, c)];
            }
            raw[(0, c)] = -acc / lead;
            for r in 1..w {
                raw[(r, c)] = cur[(r - 1, c)];
            }
        }
        let qr = raw.qr();
        bases[t - 1] = qr.q();
        rs[t] = qr.r();
    }
    let b0 = &bases[d - 1];
    let rhs = DVector::from_column_slice(known);
    let mut c = b0.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
    let mut log_scale = 0.0;
    let mut out = vec![(f64::NEG_INFINITY, 0.0); big_t + 1];
    for (t, z) in known.iter().enumerate() {
        out[t] = (z.norm().ln(), z.arg());
    }
    for t in d..=big_t - d {
        c = rs[t].solve_upper_triangular(&c)?;
        let nrm = c.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return None;
        }
        c /= Complex64::new(nrm, 0.0);
        log_scale += nrm.ln();
        let g = (bases[t].row(w - 1) * &c)[(0, 0)];
        out[t + d] = (g.norm().ln() + log_scale, g.arg());
    }
    Some(out)
}

/// Energy near `approx` whose eigenvector on a small section peaks closest
/// to the origin; used to pick benchmark energies with centred eigenvectors.
pub fn centered_energy(
    v: &TrigPolynomial,
    alpha: f64,
    theta: f64,
    approx: f64,
    window: f64,
    half_width: usize,
) -> Result<f64> {
    let op = truncate(v, alpha, Complex64::new(theta, 0.0), -(half_width as i64), half_width as i64)?;
    let (vals, vecs) = crate::linalg::dense_hermitian_eigen(op.to_dense());
    let centre = half_width as i64;
    let mut best: Option<(i64, f64, f64)> = None;
    for (k, &lam) in vals.iter().enumerate() {
        if (lam - approx).abs() > window {
            continue;
        }
        let col = vecs.column(k);
        let peak = (0..col.len()).max_by(|&a, &b| col[a].norm().partial_cmp(&col[b].norm()).unwrap()).unwrap();
        let off = (peak as i64 - centre).abs();
        let key = (off, (lam - approx).abs());
        if best.map_or(true, |b| key.0 < b.0 || (key.0 == b.0 && key.1 < b.1)) {
            best = Some((off, key.1, lam));
        }
    }
    best.map(|b| b.2).ok_or(Error::NoEigenvalueWithin { target: approx, nearest: f64::NAN, tolerance: window })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskWindow {
    /// Resonances bracketing the window; `next` is None past the last one found.
    pub n_l: i64,
    pub next: Option<i64>,
    /// |j| must satisfy lower < |j| < upper (upper None: unbounded).
    pub lower: f64,
    pub upper: Option<f64>,
    pub points: usize,
    pub rate: Option<f64>,
}

impl MaskWindow {
    pub fn contains(&self, j: i64) -> bool {
        let a = j.abs() as f64;
        a > self.lower && self.upper.map_or(true, |u| a < u)
    }
}

/// Windows 2C0|n_l| + η|n_{l+1}| < |j| < |n_{l+1}|/(2C0) between consecutive
/// resonances, plus the open window beyond the last resonance found.
pub fn mask_windows(res: &ResonanceSet, c0: f64, eta: f64) -> Vec<MaskWindow> {
    let mut ns: Vec<i64> = Vec::new();
    for r in &res.resonances {
        if !ns.iter().any(|m| m.abs() == r.n.abs()) {
            ns.push(r.n);
        }
    }
    ns.sort_by_key(|n| n.abs());
    if ns.first().map_or(true, |n| *n != 0) {
        ns.insert(0, 0);
    }
    let mut out = Vec::new();
    for pair in ns.windows(2) {
        let (a, b) = (pair[0].abs() as f64, pair[1].abs() as f64);
        out.push(MaskWindow {
            n_l: pair[0],
            next: Some(pair[1]),
            lower: 2.0 * c0 * a + eta * b,
            upper: Some(b / (2.0 * c0)),
            points: 0,
            rate: None,
        });
    }
    let last = *ns.last().unwrap();
    out.push(MaskWindow {
        n_l: last,
        next: None,
        lower: 2.0 * c0 * last.abs() as f64,
        upper: None,
        points: 0,
        rate: None,
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularSite {
    pub site: i64,
    pub x1: i64,
    pub x2: i64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub theta: f64,
    pub theta_input: f64,
    pub energy: f64,
    pub sites: usize,
    pub shift: i64,
    pub c0: f64,
    pub eta: f64,
    pub resonance_set: ResonanceSet,
    /// True when the final window is open because no further resonance
    /// was searched beyond the horizon.
    pub horizon_limited: bool,
    pub windows: Vec<MaskWindow>,
    pub fit_points: usize,
    pub empty_mask: bool,
    /// Nats per site.
    pub masked_decay_rate: Option<f64>,
    pub rate_stderr: Option<f64>,
    pub fit_max_residual: Option<f64>,
    /// γ_d − δ with δ twice the fit's standard error, once γ_d is supplied.
    pub predicted_rate: Option<f64>,
    pub regular_sites: Vec<RegularSite>,
    pub residual: f64,
    pub lo: i64,
    pub u: Vec<Complex64>,
    pub log_abs: Vec<f64>,
}

impl LocalizationReport {
    pub fn set_prediction(&mut self, gamma_d: f64) {
        let delta = 2.0 * self.rate_stderr.unwrap_or(0.0);
        self.predicted_rate = Some(gamma_d - delta);
    }
}

/// Slope fit of ln|u_j| against |j|: (rate, stderr, max residual).
fn decay_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let (slope, intercept, max_res) = crate::numeric::linear_fit(xs, ys);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let stderr = if n > 2.0 && sxx > 0.0 { (ss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (-slope, stderr, max_res)
}

const MIN_FIT_POINTS: usize = 10;

pub fn decay_report(pair: &Eigenpair, res: &ResonanceSet, c0: f64, eta: f64) -> Result<LocalizationReport> {
    if !(c0 > 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput("need C0 > 1 and η ∈ (0, 1)".into()));
    }
    if wrap_phase(std::f64::consts::TAU * (res.theta - pair.theta)).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "resonance set is for θ = {}, eigenpair phase is {}",
            res.theta, pair.theta
        )));
    }
    let mut windows = mask_windows(res, c0, eta);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for w in windows.iter_mut() {
        let (mut wx, mut wy) = (Vec::new(), Vec::new());
        for j in pair.lo..=pair.hi {
            if j == 0 || !pair.in_bulk(j) || !w.contains(j) {
                continue;
            }
            let la = pair.log_abs_at(j);
            if la.is_finite() {
                wx.push(j.abs() as f64);
                wy.push(la);
            }
        }
        w.points = wx.len();
        if wx.len() >= MIN_FIT_POINTS {
            w.rate = Some(decay_fit(&wx, &wy).0);
        }
        xs.extend(wx);
        ys.extend(wy);
    }
    let empty_mask = xs.len() < MIN_FIT_POINTS;
    let (rate, stderr, maxres) = if empty_mask {
        (None, None, None)
    } else {
        let (r, s, m) = decay_fit(&xs, &ys);
        (Some(r), Some(s), Some(m))
    };
    Ok(LocalizationReport {
        theta: pair.theta,
        theta_input: pair.theta_input,
        energy: pair.energy,
        sites: pair.sites,
        shift: pair.shift,
        c0,
        eta,
        resonance_set: res.clone(),
        horizon_limited: true,
        windows,
        fit_points: xs.len(),
        empty_mask,
        masked_decay_rate: rate,
        rate_stderr: stderr,
        fit_max_residual: maxres,
        predicted_rate: None,
        regular_sites: Vec::new(),
        residual: pair.residual,
        lo: pair.lo,
        u: pair.u.clone(),
        log_abs: pair.log_abs.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAssignment {
    pub j: i64,
    pub ell: usize,
    pub s: u64,
    pub q_ell: u64,
    pub zeta: f64,
    pub i1: (i64, i64),
    pub i2: (i64, i64),
}

impl ScaleAssignment {
    pub fn total_len(&self) -> i64 {
        (self.i1.1 - self.i1.0 + 1) + (self.i2.1 - self.i2.0 + 1)
    }
}

/// Scales ℓ, s with 2sq_ℓ ≤ ζj < min(2(s+1)q_ℓ, 2q_{ℓ+1}) and the intervals
/// I1, I2 attached to a site j > 0 lying between resonances n_l and n_next.
pub fn scale_assignment(j: i64, n_l: i64, n_next: i64, c0: f64, q: &[u64]) -> Option<ScaleAssignment> {
    if j <= 0 || q.len() < 2 {
        return None;
    }
    let (a, b) = (n_l.abs(), n_next.abs());
    let zeta = if 2 * a < j && 2 * j < b { 1.0 / 32.0 } else { (c0 - 1.0) / (16.0 * c0) };
    let zj = zeta * j as f64;
    let ell = (0..q.len()).rev().find(|&l| 2.0 * q[l] as f64 <= zj)?;
    if ell + 1 >= q.len() || zj >= 2.0 * q[ell + 1] as f64 {
        return None;
    }
    let q_ell = q[ell];
    let s = (zj / (2.0 * q_ell as f64)).floor() as u64;
    let m = (2 * s * q_ell) as i64;
    let (i1, i2) = if 3 * j < b {
        let i1 = if n_l >= 0 { (-m + 1, 0) } else { (1, m) };
        (i1, (j - m + 1, j + m))
    } else if 2 * j < b {
        ((-m + 1, m), (j - m + 1, j))
    } else {
        ((-m + 1, m), (j + 1, j + m))
    };
    Some(ScaleAssignment { j, ell, s, q_ell, zeta, i1, i2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityWitness {
    pub x1: i64,
    pub x2: i64,
    /// min over the 2d boundary entries of −ξ|y − x_i| − ln|G_J(y, ·)|.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityResult {
    pub y: i64,
    pub m: usize,
    pub xi: f64,
    pub regular: bool,
    pub witness: Option<RegularityWitness>,
    pub intervals_tried: usize,
    pub singular_skipped: usize,
}

/// Searches intervals J ∋ y of m sites whose ends are at least m/7 from y
/// for the boundary Green's bounds at rate ξ.
pub fn regularity_check(
    v: &TrigPolynomial,
    alpha: f64,
    theta: f64,
    energy: f64,
    y: i64,
    m: usize,
    xi: f64,
) -> Result<RegularityResult> {
    let d = v.degree();
    if m < 7 * d || d == 0 {
        return Err(Error::InvalidInput(format!("need m ≥ 7d = {}", 7 * d)));
    }
    let mi = m as i64;
    let th = Complex64::new(theta, 0.0);
    let mut tried = 0;
    let mut skipped = 0;
    for x1 in (y - mi + 1)..=y {
        let x2 = x1 + mi - 1;
        if 7 * (y - x1) < mi || 7 * (x2 - y) < mi {
            continue;
        }
        tried += 1;
        let mut pairs = Vec::with_capacity(2 * d);
        for j in 0..d as i64 {
            pairs.push((y, x1 + j));
            pairs.push((y, x2 - j));
        }
        let table = match greens(v, alpha, th, energy, x1, x2, &pairs) {
            Ok(t) => t,
            Err(Error::NearSingular { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let margin = table
            .entries
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let xi_end = if k % 2 == 0 { x1 } else { x2 };
                -xi * (y - xi_end).abs() as f64 - g.value.norm().ln()
            })
            .fold(f64::INFINITY, f64::min);
        if margin > 0.0 {
            return Ok(RegularityResult {
                y,
                m,
                xi,
                regular: true,
                witness: Some(RegularityWitness { x1, x2, margin }),
                intervals_tried: tried,
                singular_skipped: skipped,
            });
        }
    }
    Ok(RegularityResult { y, m, xi, regular: false, witness: None, intervals_tried: tried, singular_skipped: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Resonance;

    fn set(ns: &[i64]) -> ResonanceSet {
        ResonanceSet {
            theta: 0.0,
            eps0: 0.5,
            horizon: 1000,
            resonances: ns.iter().map(|&n| Resonance { n, distance: 0.0 }).collect(),
        }
    }

    #[test]
    fn windows_follow_resonances() {
        let w = mask_windows(&set(&[0, 3, -40]), 2.0, 0.5);
        assert_eq!(w.len(), 3);
        assert_eq!((w[0].lower, w[0].upper), (1.5, Some(0.75)));
        assert_eq!((w[1].lower, w[1].upper), (32.0, Some(10.0)));
        assert_eq!((w[2].lower, w[2].upper), (160.0, None));
        assert!(!w[2].contains(160) && w[2].contains(161) && w[2].contains(-161));
    }

    #[test]
    fn scale_assignment_sizes() {
        let q = [1u64, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610];
        for j in [300i64, 900, 2000, 5000] {
            for &(nl, nn) in &[(0i64, 100_000i64), (-5, 100_000), (10, 7000), (3, 3000)] {
                if let Some(sa) = scale_assignment(j, nl, nn, 4.0, &q) {
                    let two_sq = 2 * sa.s * sa.q_ell;
                    let zj = sa.zeta * j as f64;
                    assert!(two_sq as f64 <= zj);
                    assert!(zj < (2 * (sa.s + 1) * sa.q_ell).min(2 * q[sa.ell + 1]) as f64);
                    assert_eq!(sa.total_len(), 6 * (sa.s * sa.q_ell) as i64);
                }
            }
        }
    }

    #[test]
    fn synthetic_exponential_rate() {
        let sites = 600usize;
        let lo = -(sites as i64);
        let log_abs: Vec<f64> = (lo..=sites as i64).map(|j| -0.7 * j.abs() as f64).collect();
        let pair = Eigenpair {
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
        };
        let rep = decay_report(&pair, &set(&[0]), 4.0, 0.5).unwrap();
        assert!((rep.masked_decay_rate.unwrap() - 0.7).abs() < 1e-6);
    }
}
