//! Banded sections of the dual operator
//! (L u)_n = Σ_{|k|≤d} V_k u_{n+k} + 2cos2π(θ+nα) u_n,
//! their determinants, minors and Green's functions, spectrum sampling and
//! θ-averaged log-determinants.

use crate::error::{Error, Result};
use crate::linalg::{dense_hermitian_eigen, tridiag_eigenvalues, BandedMatrix};
use crate::numeric::{hausdorff_sorted, two_cos, LogDet};
use crate::potential::TrigPolynomial;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Entry (n, m) of the infinite matrix L − E at phase θ.
pub fn operator_entry(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: Complex64,
    n: i64,
    m: i64,
) -> Complex64 {
    let k = m - n;
    let mut out = v.coeff(k);
    if k == 0 {
        out += two_cos(theta + alpha * n as f64) - energy;
    }
    out
}

/// Dirichlet section R_I L R_I* on I = [x1, x2].
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub potential: TrigPolynomial,
    pub alpha: f64,
    pub theta: Complex64,
    pub x1: i64,
    pub x2: i64,
    band: BandedMatrix,
}

pub fn truncate(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    x1: i64,
    x2: i64,
) -> Result<TruncatedOperator> {
    if x2 < x1 {
        return Err(Error::InvalidInput(format!("empty interval [{x1}, {x2}]")));
    }
    let band = section_band(v, alpha, theta, ZERO, x1, x2);
    Ok(TruncatedOperator { potential: v.clone(), alpha, theta, x1, x2, band })
}

fn section_band(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: Complex64,
    x1: i64,
    x2: i64,
) -> BandedMatrix {
    let n = (x2 - x1 + 1) as usize;
    let d = v.degree();
    let mut b = BandedMatrix::zeros(n, d, d);
    for i in 0..n {
        for j in i.saturating_sub(d)..=(i + d).min(n - 1) {
            let e = operator_entry(v, alpha, theta, energy, x1 + i as i64, x1 + j as i64);
            b.set(i, j, e);
        }
    }
    b
}

impl TruncatedOperator {
    pub fn len(&self) -> usize {
        self.band.n()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry at global indices (n, m), zero outside I or the band.
    pub fn entry(&self, n: i64, m: i64) -> Complex64 {
        if n < self.x1 || n > self.x2 || m < self.x1 || m > self.x2 {
            return ZERO;
        }
        self.band.get((n - self.x1) as usize, (m - self.x1) as usize)
    }

    pub fn band(&self) -> &BandedMatrix {
        &self.band
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.band.to_dense()
    }

    /// The banded matrix L_I − E.
    pub fn shifted(&self, energy: Complex64) -> BandedMatrix {
        let mut b = self.band.clone();
        for i in 0..b.n() {
            let v = b.get(i, i);
            b.set(i, i, v - energy);
        }
        b
    }

    /// ‖L_I − L_I*‖_max / ‖L_I‖_max.
    pub fn self_adjoint_defect(&self) -> f64 {
        let m = self.to_dense();
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }
}

/// P_n(θ) = det R_{[0,n−1]}(L − E)R*_{[0,n−1]} in log form.
pub fn det_p(v: &TrigPolynomial, alpha: f64, theta: Complex64, energy: f64, n: usize) -> LogDet {
    assert!(n >= 1);
    section_band(v, alpha, theta, Complex64::new(energy, 0.0), 0, n as i64 - 1).lu().log_det()
}

/// det(E − H_{[0,k−1]}(θ)) for the Schrödinger operator
/// (Hu)_n = u_{n+1} + u_{n−1} + V(θ+nα)u_n; 1 for k = 0 and 0 for k < 0.
pub fn det_schrodinger(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    k: i64,
) -> Complex64 {
    if k < 0 {
        return ZERO;
    }
    // Three-term recursion D_j = (E − V_j) D_{j−1} − D_{j−2}.
    let (mut prev, mut cur) = (ZERO, Complex64::new(1.0, 0.0));
    for j in 0..k {
        let next = (energy - v.eval(theta + alpha * j as f64)) * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Determinant of the submatrix of L − E with the given global rows and
/// columns (both strictly increasing), in log form.
pub fn submatrix_log_det(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: Complex64,
    rows: &[i64],
    cols: &[i64],
) -> Result<LogDet> {
    if rows.len() != cols.len() {
        return Err(Error::InvalidInput("row and column sets differ in size".into()));
    }
    if rows.windows(2).any(|w| w[0] >= w[1]) || cols.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("index sets must be strictly increasing".into()));
    }
    let n = rows.len();
    if n == 0 {
        return Ok(LogDet::ONE);
    }
    let d = v.degree() as i64;
    let mut entries = Vec::new();
    let (mut kl, mut ku) = (0usize, 0usize);
    for (r, &gr) in rows.iter().enumerate() {
        let lo = cols.partition_point(|&c| c < gr - d);
        let hi = cols.partition_point(|&c| c <= gr + d);
        for (c, &gc) in cols.iter().enumerate().take(hi).skip(lo) {
            let e = operator_entry(v, alpha, theta, energy, gr, gc);
            if e != ZERO {
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
                entries.push((r, c, e));
            }
        }
    }
    let mut b = BandedMatrix::zeros(n, kl, ku);
    for (r, c, e) in entries {
        b.set(r, c, e);
    }
    Ok(b.lu().log_det())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenEntry {
    pub x: i64,
    pub y: i64,
    /// G_I(x, y) from a direct solve.
    pub value: Complex64,
    /// μ_{x,y} = (−1)^{x+y} det R_{I∖{y}}(L−E)R*_{I∖{x}}.
    pub minor: LogDet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreensTable {
    pub x1: i64,
    pub x2: i64,
    pub energy: f64,
    pub theta: Complex64,
    pub entries: Vec<GreenEntry>,
    /// det(L_I − E).
    pub denominator: LogDet,
    /// ‖A‖₁·‖A^{-1}‖₁ estimate.
    pub condition: f64,
    /// Max relative gap between G and μ/P over entries above 1e−6 of the largest.
    pub cramer_max_rel_err: f64,
}

/// Green's function G_I = (L_I − E)^{-1} at the requested pairs.
pub fn greens(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    x1: i64,
    x2: i64,
    pairs: &[(i64, i64)],
) -> Result<GreensTable> {
    let op = truncate(v, alpha, theta, x1, x2)?;
    for &(x, y) in pairs {
        for i in [x, y] {
            if i < x1 || i > x2 {
                return Err(Error::IndexOutOfRange { index: i, lo: x1, hi: x2 });
            }
        }
    }
    let e = Complex64::new(energy, 0.0);
    let a = op.shifted(e);
    let norm_a = a.norm1();
    let lu = a.lu();
    let condition = norm_a * lu.inverse_norm1_estimate();
    if !(condition < 1e12) {
        return Err(Error::NearSingular { condition });
    }
    let denominator = lu.log_det();
    let n = op.len();
    let mut columns: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    for &(_, y) in pairs {
        columns.entry(y).or_insert_with(|| {
            let mut rhs = vec![ZERO; n];
            rhs[(y - x1) as usize] = Complex64::new(1.0, 0.0);
            lu.solve(&rhs)
        });
    }
    let all: Vec<i64> = (x1..=x2).collect();
    let mut entries = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let rows: Vec<i64> = all.iter().cloned().filter(|&r| r != y).collect();
        let cols: Vec<i64> = all.iter().cloned().filter(|&c| c != x).collect();
        let mut minor = submatrix_log_det(v, alpha, theta, e, &rows, &cols)?;
        if (x + y).rem_euclid(2) == 1 {
            minor = minor.neg();
        }
        entries.push(GreenEntry { x, y, value: columns[&y][(x - x1) as usize], minor });
    }
    let gmax = entries.iter().map(|g| g.value.norm()).fold(0.0, f64::max);
    let cramer_max_rel_err = entries
        .iter()
        .filter(|g| g.value.norm() >= 1e-6 * gmax)
        .map(|g| {
            let ratio = g.minor.div(&denominator).to_complex();
            (ratio - g.value).norm() / g.value.norm()
        })
        .fold(0.0, f64::max);
    Ok(GreensTable {
        x1,
        x2,
        energy,
        theta,
        entries,
        denominator,
        condition,
        cramer_max_rel_err,
    })
}

/// Boundary expansion of a solution of (L − E)u = 0 through G_I:
/// returns the reconstructed u(x) = −Σ_{y∈I} G_I(x,y) Σ_{m∉I} (L−E)_{y,m} u(m).
pub fn boundary_expansion(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    x1: i64,
    x2: i64,
    x: i64,
    u: &dyn Fn(i64) -> Complex64,
) -> Result<Complex64> {
    let d = v.degree() as i64;
    let edge: Vec<i64> = (x1..=x2).filter(|&y| y < x1 + d || y > x2 - d).collect();
    let pairs: Vec<(i64, i64)> = edge.iter().map(|&y| (x, y)).collect();
    let table = greens(v, alpha, theta, energy, x1, x2, &pairs)?;
    let e = Complex64::new(energy, 0.0);
    let mut acc = ZERO;
    for g in &table.entries {
        let y = g.y;
        let mut s = ZERO;
        for m in (y - d)..=(y + d) {
            if m < x1 || m > x2 {
                s += operator_entry(v, alpha, theta, e, y, m) * u(m);
            }
        }
        acc -= g.value * s;
    }
    Ok(acc)
}

/// Which operator family a spectrum sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// (Hu)_n = u_{n+1} + u_{n−1} + V(θ+nα)u_n.
    Schrodinger,
    /// The dual operator L.
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub side: Side,
    pub sites: usize,
    pub phases: usize,
    /// Sorted eigenvalues kept.
    pub eigenvalues: Vec<f64>,
    pub raw_count: usize,
    /// Eigenvalues dropped as boundary states.
    pub edge_states_dropped: usize,
}

impl SpectrumSample {
    pub fn distance_to(&self, e: f64) -> f64 {
        let i = self.eigenvalues.partition_point(|&x| x < e);
        let mut d = f64::INFINITY;
        if i < self.eigenvalues.len() {
            d = d.min(self.eigenvalues[i] - e);
        }
        if i > 0 {
            d = d.min(e - self.eigenvalues[i - 1]);
        }
        d
    }

    /// Membership rule: distance below 3/sites.
    pub fn contains(&self, e: f64) -> bool {
        self.distance_to(e) < 3.0 / self.sites as f64
    }
}

/// Share of an eigenvector's weight that sits in the outer 10% at both ends
/// above which it counts as a Dirichlet boundary state.
pub const EDGE_WEIGHT_CUTOFF: f64 = 0.5;

/// Sorted union of section eigenvalues at phases θ_p = (p + 1/2)/phases.
///
/// With `drop_edge_states`, eigenvalues whose eigenvectors carry more than
/// half their weight within the outer tenth of the section are discarded;
/// these are Dirichlet boundary states lying in spectral gaps.
pub fn spectrum_sample(
    v: &TrigPolynomial,
    alpha: f64,
    sites: usize,
    phases: usize,
    side: Side,
    drop_edge_states: bool,
) -> Result<SpectrumSample> {
    if sites < 100 || phases < 1 {
        return Err(Error::InvalidInput("spectrum sample needs sites ≥ 100".into()));
    }
    let per_phase: Vec<(Vec<f64>, usize, usize)> = (0..phases)
        .into_par_iter()
        .map(|p| {
            let theta = (p as f64 + 0.5) / phases as f64;
            section_spectrum(v, alpha, theta, sites, side, drop_edge_states)
        })
        .collect();
    let mut eig = Vec::new();
    let (mut raw, mut dropped) = (0, 0);
    for (e, r, dr) in per_phase {
        eig.extend(e);
        raw += r;
        dropped += dr;
    }
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SpectrumSample {
        side,
        sites,
        phases,
        eigenvalues: eig,
        raw_count: raw,
        edge_states_dropped: dropped,
    })
}

fn section_spectrum(
    v: &TrigPolynomial,
    alpha: f64,
    theta: f64,
    sites: usize,
    side: Side,
    drop_edge: bool,
) -> (Vec<f64>, usize, usize) {
    let tridiagonal = match side {
        Side::Schrodinger => {
            let d: Vec<f64> =
                (0..sites).map(|n| v.eval_real(theta + alpha * n as f64)).collect();
            Some((d, vec![1.0; sites - 1]))
        }
        Side::Dual if v.degree() <= 1 => {
            // A diagonal unitary gauge makes the off-diagonal |V_1| real.
            let d: Vec<f64> = (0..sites)
                .map(|n| v.coeff(0).re + 2.0 * (crate::numeric::TAU * (theta + alpha * n as f64)).cos())
                .collect();
            Some((d, vec![v.coeff(1).norm(); sites - 1]))
        }
        Side::Dual => None,
    };
    let edge = (sites / 10).max(1);
    let edge_weight = |w: &dyn Fn(usize) -> f64| -> f64 {
        let total: f64 = (0..sites).map(w).sum();
        let outer: f64 = (0..edge).map(w).sum::<f64>() + (sites - edge..sites).map(w).sum::<f64>();
        outer / total
    };
    match tridiagonal {
        Some((d, e)) => {
            let eig = tridiag_eigenvalues(&d, &e);
            if !drop_edge {
                let n = eig.len();
                return (eig, n, 0);
            }
            let mut kept = Vec::with_capacity(eig.len());
            for &lam in &eig {
                let vec = tridiag_eigenvector(&d, &e, lam);
                if edge_weight(&|i| vec[i] * vec[i]) <= EDGE_WEIGHT_CUTOFF {
                    kept.push(lam);
                }
            }
            let dropped = eig.len() - kept.len();
            (kept, eig.len(), dropped)
        }
        None => {
            let op = truncate(v, alpha, Complex64::new(theta, 0.0), 0, sites as i64 - 1)
                .expect("non-empty section");
            let (vals, vecs) = dense_hermitian_eigen(op.to_dense());
            if !drop_edge {
                let n = vals.len();
                return (vals, n, 0);
            }
            let mut kept = Vec::new();
            for (c, &lam) in vals.iter().enumerate() {
                if edge_weight(&|i| vecs[(i, c)].norm_sqr()) <= EDGE_WEIGHT_CUTOFF {
                    kept.push(lam);
                }
            }
            let dropped = vals.len() - kept.len();
            (kept, vals.len(), dropped)
        }
    }
}

/// Eigenvector of a symmetric tridiagonal matrix at a computed eigenvalue,
/// by two steps of inverse iteration.
pub fn tridiag_eigenvector(d: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let n = d.len();
    let scale = d.iter().map(|x| x.abs()).fold(0.0, f64::max)
        + 2.0 * e.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let shift = lambda + 1e-13 * scale.max(1.0);
    let mut b = BandedMatrix::zeros(n, 1, 1);
    for i in 0..n {
        b.set(i, i, Complex64::new(d[i] - shift, 0.0));
        if i + 1 < n {
            b.set(i, i + 1, Complex64::new(e[i], 0.0));
            b.set(i + 1, i, Complex64::new(e[i], 0.0));
        }
    }
    let lu = b.lu();
    let mut x: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + ((i * 7919) % 13) as f64 * 0.01, 0.0)).collect();
    for _ in 0..2 {
        x = lu.solve(&x);
        let s = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(s > 0.0 && s.is_finite()) {
            break;
        }
        for z in x.iter_mut() {
            *z /= s;
        }
    }
    x.iter().map(|z| z.re).collect()
}

/// Hausdorff distance between the Schrödinger-side and dual-side samples
/// (both with boundary states dropped).
pub fn duality_distance(v: &TrigPolynomial, alpha: f64, sites: usize, phases: usize) -> Result<f64> {
    let s = spectrum_sample(v, alpha, sites, phases, Side::Schrodinger, true)?;
    let d = spectrum_sample(v, alpha, sites, phases, Side::Dual, true)?;
    Ok(hausdorff_sorted(&s.eigenvalues, &d.eigenvalues))
}

/// Grid average of (1/n)·ln|P_n(θ + iε)| over θ_t = t/grid.
pub fn avg_log_det(
    v: &TrigPolynomial,
    alpha: f64,
    energy: f64,
    n: usize,
    eps: f64,
    grid: usize,
) -> Result<f64> {
    if n < 1 || grid < 1 {
        return Err(Error::InvalidInput("avg_log_det needs n ≥ 1 and grid ≥ 1".into()));
    }
    let vals: Vec<Result<f64>> = (0..grid)
        .into_par_iter()
        .map(|t| {
            let theta = t as f64 / grid as f64;
            let mut p = det_p(v, alpha, Complex64::new(theta, eps), energy, n);
            if p.is_zero() {
                p = det_p(v, alpha, Complex64::new(theta + 1e-9, eps), energy, n);
                if p.is_zero() {
                    return Err(Error::ZeroHit { index: t });
                }
            }
            Ok(p.log_abs / n as f64)
        })
        .collect();
    let mut s = 0.0;
    for r in vals {
        s += r?;
    }
    Ok(s / grid as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Frequency;
    use crate::linalg::dense_det;

    fn golden() -> f64 {
        Frequency::golden().to_f64()
    }

    #[test]
    fn one_site_section() {
        let v = TrigPolynomial::amo(0.5);
        let th = 0.17;
        let op = truncate(&v, golden(), Complex64::new(th, 0.0), 0, 0).unwrap();
        let want = 2.0 * (crate::numeric::TAU * th).cos();
        assert!((op.entry(0, 0).re - want).abs() < 1e-15);
        let p = det_p(&v, golden(), Complex64::new(th, 0.0), 0.3, 1).to_complex();
        assert!((p.re - (want - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_shape() {
        let v = TrigPolynomial::amo(0.5);
        let op = truncate(&v, golden(), Complex64::new(0.2, 0.0), 0, 2).unwrap();
        assert_eq!(op.entry(0, 1), Complex64::new(0.5, 0.0));
        assert_eq!(op.entry(2, 1), Complex64::new(0.5, 0.0));
        assert_eq!(op.entry(0, 2), ZERO);
        assert!(op.self_adjoint_defect() < 1e-15);
    }

    #[test]
    fn two_site_green() {
        let v = TrigPolynomial::amo(0.5);
        let a = golden();
        let th = Complex64::new(0.31, 0.0);
        let e = 0.1;
        let t = greens(&v, a, th, e, 0, 1, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let a00 = two_cos(th) - e;
        let a11 = two_cos(th + a) - e;
        let det = a00 * a11 - 0.25;
        let want = [a11 / det, -0.5 / det, -0.5 / det, a00 / det];
        for (g, w) in t.entries.iter().zip(want) {
            assert!((g.value - w).norm() < 1e-13);
        }
        assert!(t.cramer_max_rel_err < 1e-12);
    }

    #[test]
    fn det_p_matches_dense() {
        let v = TrigPolynomial::amo(0.5);
        let a = golden();
        let th = Complex64::new(0.77, 0.0);
        let p = det_p(&v, a, th, 0.4, 30).to_complex();
        let mut op = truncate(&v, a, th, 0, 29).unwrap().to_dense();
        for i in 0..30 {
            op[(i, i)] -= 0.4;
        }
        let d = dense_det(&op);
        assert!((p - d).norm() < 1e-9 * d.norm());
    }

    #[test]
    fn free_spectrum_in_range() {
        let s =
            spectrum_sample(&TrigPolynomial::zero(), golden(), 200, 2, Side::Schrodinger, false)
                .unwrap();
        assert!(s.eigenvalues.iter().all(|&x| x.abs() < 2.0));
        assert_eq!(s.eigenvalues.len(), 400);
    }
}
