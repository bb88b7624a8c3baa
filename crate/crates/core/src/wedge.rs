//! Exterior-power minors of dual transfer products, the truncated
//! determinants they equal up to a constant, the block-minor expansion of
//! block-tridiagonal matrices, and Green's-function numerator bounds.

use crate::cocycle::dual_cocycle;
use crate::error::{Error, Result};
use crate::linalg::{combinations, dense_log_det};
use crate::numeric::{hausdorff_complex, linear_fit, LogDet};
use crate::operators::{greens, operator_entry, submatrix_log_det};
use crate::potential::TrigPolynomial;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Rows i_1 < … < i_m and columns j_1 < … < j_m, labels in [−d, d−1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WedgeMinorRequest {
    pub rows: Vec<i64>,
    pub cols: Vec<i64>,
    pub k: usize,
}

impl WedgeMinorRequest {
    pub fn validate(&self, d: usize) -> Result<()> {
        let d = d as i64;
        let m = self.rows.len();
        if m == 0 || m != self.cols.len() || m as i64 > d {
            return Err(Error::InvalidInput(format!("minor order must be in 1..={d}")));
        }
        for set in [&self.rows, &self.cols] {
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput("minor indices must increase".into()));
            }
            for &i in set.iter() {
                if i < -d || i >= d {
                    return Err(Error::IndexOutOfRange { index: i, lo: -d, hi: d - 1 });
                }
            }
        }
        Ok(())
    }
}

/// Position of label i in the state (u(n+d−1), …, u(n−d)).
fn state_pos(d: usize, i: i64) -> usize {
    (d as i64 - 1 - i) as usize
}

/// ⟨δ_{i·}, Λ^m (L)_k δ_{j·}⟩: the m×m minor of the k-step dual product.
pub fn wedge_minor_q(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    req: &WedgeMinorRequest,
) -> Result<LogDet> {
    let d = v.degree();
    req.validate(d)?;
    let c = dual_cocycle(v, energy, alpha)?;
    let p = c.transfer_product(theta, req.k as i64)?;
    let m = req.rows.len();
    let sub = DMatrix::from_fn(m, m, |a, b| {
        p.matrix[(state_pos(d, req.rows[a]), state_pos(d, req.cols[b]))]
    });
    Ok(dense_log_det(&sub).scale_log(m as f64 * p.log_scale))
}

/// Column set [d, k−d−1] ∪ {j·} ∪ ([k−d, k+d−1] ∖ {k+i·}), ascending.
pub fn theorem_column_set(d: usize, req: &WedgeMinorRequest) -> Vec<i64> {
    let (d, k) = (d as i64, req.k as i64);
    let mut cols: Vec<i64> = (d..k - d).collect();
    cols.extend(req.cols.iter().cloned());
    cols.extend((k - d..k + d).filter(|c| !req.rows.iter().any(|i| k + i == *c)));
    cols.sort_unstable();
    cols
}

/// det R_rows (L − E) R*_cols with explicit index sets (ascending).
pub fn general_truncated_det(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    rows: &[i64],
    cols: &[i64],
) -> Result<LogDet> {
    if rows.len() != cols.len() {
        return Err(Error::InvalidInput("row and column sets differ in size".into()));
    }
    if let (Some(&lo), Some(&hi)) = (rows.first(), rows.last()) {
        let d = v.degree() as i64;
        for &c in cols {
            if c < lo - d || c > hi + d {
                return Err(Error::IndexOutOfRange { index: c, lo: lo - d, hi: hi + d });
            }
        }
    }
    submatrix_log_det(v, alpha, theta, Complex64::new(energy, 0.0), rows, cols)
}

/// The determinant side of the wedge identity for a request.
pub fn theorem_det(
    v: &TrigPolynomial,
    alpha: f64,
    theta: Complex64,
    energy: f64,
    req: &WedgeMinorRequest,
) -> Result<LogDet> {
    let d = v.degree();
    req.validate(d)?;
    if req.k < 2 * d {
        return Err(Error::InvalidInput(format!("k must be at least 2d = {}", 2 * d)));
    }
    let rows: Vec<i64> = (0..req.k as i64).collect();
    general_truncated_det(v, alpha, theta, energy, &rows, &theorem_column_set(d, req))
}

/// Hadamard bound (log of the product of row norms) of the same submatrix.
fn theorem_det_scale(v: &TrigPolynomial, alpha: f64, theta: Complex64, energy: f64, req: &WedgeMinorRequest) -> f64 {
    let cols = theorem_column_set(v.degree(), req);
    (0..req.k as i64)
        .map(|r| {
            cols.iter()
                .map(|&c| operator_entry(v, alpha, theta, Complex64::new(energy, 0.0), r, c).norm_sqr())
                .sum::<f64>()
                .sqrt()
                .ln()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Th1Sample {
    pub k: usize,
    pub energy: f64,
    pub theta: f64,
    pub ratio: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Th1Report {
    pub samples: Vec<Th1Sample>,
    /// Samples skipped because the determinant side vanished.
    pub skipped_zero: usize,
    /// Mean ratio, the empirical constant C(d).
    pub empirical_c: Complex64,
    /// max |ratio − C|/|C|.
    pub max_rel_spread: f64,
    /// Sample standard deviation of the ratios over |C|.
    pub std_over_mean: f64,
    /// Convention used: rows deleted through R, columns through R*, ascending order.
    pub convention: String,
}

/// Ratio Q_k / (V_d^{−k}·det) across the grid of (k, E, θ).
pub fn th1_ratio_check(
    v: &TrigPolynomial,
    alpha: f64,
    energies: &[f64],
    thetas: &[f64],
    ks: &[usize],
    rows: &[i64],
    cols: &[i64],
) -> Result<Th1Report> {
    let distinct = |xs: &[f64]| {
        let mut s = xs.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.dedup();
        s.len()
    };
    let mut ku = ks.to_vec();
    ku.sort_unstable();
    ku.dedup();
    if ku.len() < 3 || distinct(energies) < 3 {
        return Err(Error::InvalidInput("need ≥ 3 distinct k and ≥ 3 distinct E".into()));
    }
    let vd = LogDet::from_complex(v.leading());
    let mut samples = Vec::new();
    let mut skipped = 0;
    for &k in ks {
        let req = WedgeMinorRequest { rows: rows.to_vec(), cols: cols.to_vec(), k };
        for &e in energies {
            for &t in thetas {
                let th = Complex64::new(t, 0.0);
                let q = wedge_minor_q(v, alpha, th, e, &req)?;
                let det = theorem_det(v, alpha, th, e, &req)?;
                let scale = theorem_det_scale(v, alpha, th, e, &req);
                if det.is_zero() || det.log_abs - scale < (1e-10f64).ln() {
                    skipped += 1;
                    continue;
                }
                // V_d^{−k}·det
                let denom = LogDet {
                    log_abs: det.log_abs - k as f64 * vd.log_abs,
                    phase: det.phase - k as f64 * vd.phase,
                };
                samples.push(Th1Sample { k, energy: e, theta: t, ratio: q.div(&denom).to_complex() });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("every sample had a vanishing determinant".into()));
    }
    let n = samples.len() as f64;
    let c: Complex64 = samples.iter().map(|s| s.ratio).sum::<Complex64>() / n;
    let max_rel_spread = samples.iter().map(|s| (s.ratio - c).norm()).fold(0.0, f64::max) / c.norm();
    let var = samples.iter().map(|s| (s.ratio - c).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Th1Report {
        samples,
        skipped_zero: skipped,
        empirical_c: c,
        max_rel_spread,
        std_over_mean: var.sqrt() / c.norm(),
        convention: "R on rows [0,k-1], R* on columns, ascending index order".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSetReport {
    pub degree: usize,
    pub roots_wedge: Vec<Complex64>,
    pub roots_det: Vec<Complex64>,
    pub hausdorff: f64,
}

/// Roots in E of V_d^k·Q_k and of the truncated determinant at fixed θ.
pub fn zero_set_check(
    v: &TrigPolynomial,
    alpha: f64,
    theta: f64,
    req: &WedgeMinorRequest,
) -> Result<ZeroSetReport> {
    let d = v.degree();
    req.validate(d)?;
    let cols = theorem_column_set(d, req);
    let degree = (0..req.k as i64).filter(|r| cols.binary_search(r).is_ok()).count();
    let radius = 2.0 * (2.0 + v.l1_norm()) + 1.0;
    let nodes = 2 * (req.k + d);
    let th = Complex64::new(theta, 0.0);
    let vd = v.leading();
    let mut ts = Vec::with_capacity(nodes);
    let mut fq = Vec::with_capacity(nodes);
    let mut fd = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = (std::f64::consts::PI * (i as f64 + 0.5) / nodes as f64).cos();
        let e = radius * t;
        ts.push(t);
        let q = wedge_minor_q(v, alpha, th, e, req)?.to_complex();
        fq.push(q * vd.powi(req.k as i32));
        fd.push(theorem_det(v, alpha, th, e, req)?.to_complex());
    }
    let roots_wedge: Vec<Complex64> =
        poly_roots(&fit_poly(&ts, &fq, degree)).into_iter().map(|r| r * radius).collect();
    let roots_det: Vec<Complex64> =
        poly_roots(&fit_poly(&ts, &fd, degree)).into_iter().map(|r| r * radius).collect();
    let hausdorff = hausdorff_complex(&roots_wedge, &roots_det);
    Ok(ZeroSetReport { degree, roots_wedge, roots_det, hausdorff })
}

/// Least-squares monomial coefficients c_0..c_deg of samples (t_i, f_i).
fn fit_poly(ts: &[f64], fs: &[Complex64], degree: usize) -> Vec<Complex64> {
    let a = DMatrix::from_fn(ts.len(), degree + 1, |i, j| Complex64::new(ts[i].powi(j as i32), 0.0));
    let b = DVector::from_column_slice(fs);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("SVD solve");
    x.iter().cloned().collect()
}

/// Roots of Σ c_j t^j via the companion matrix; leading noise coefficients trimmed.
pub fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg].norm() <= 1e-9 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -c[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    comp.schur().eigenvalues().map(|e| e.iter().cloned().collect()).unwrap_or_default()
}

/// Block-tridiagonal M with B on the diagonal, A above and A* below.
pub fn block_tridiagonal(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, k: usize) -> DMatrix<Complex64> {
    let d = a.nrows();
    let mut m = DMatrix::zeros(k * d, k * d);
    let astar = a.adjoint();
    for blk in 0..k {
        m.view_mut((blk * d, blk * d), (d, d)).copy_from(b);
        if blk + 1 < k {
            m.view_mut((blk * d, (blk + 1) * d), (d, d)).copy_from(a);
            m.view_mut(((blk + 1) * d, blk * d), (d, d)).copy_from(&astar);
        }
    }
    m
}

/// |det| of the submatrix with 1-based row and column lists.
fn abs_det_1(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> f64 {
    assert_eq!(rows.len(), cols.len());
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i] - 1, cols[j] - 1)]);
    dense_log_det(&sub).log_abs.exp()
}

fn range1(a: usize, b: usize) -> Vec<usize> {
    (a..=b).collect()
}

fn minus(set: &[usize], drop: &[usize]) -> Vec<usize> {
    set.iter().cloned().filter(|x| !drop.contains(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMinorReport {
    /// |M(i,j)|.
    pub lhs: f64,
    /// Σ_σ Σ_τ |det(middle)·μ_σ·μ^τ|.
    pub rhs: f64,
    pub holds: bool,
}

/// Both sides of the block-minor inequality (1-based i, j).
pub fn block_minor_expansion(
    m: &DMatrix<Complex64>,
    d: usize,
    k: usize,
    i: usize,
    j: usize,
    k0: usize,
) -> Result<BlockMinorReport> {
    if d == 0 || k0 < 2 || k < k0 + 3 {
        return Err(Error::InvalidInput("need d ≥ 1, k0 ≥ 2 and k ≥ k0 + 3".into()));
    }
    if !(k0 * d + 1 <= i && i <= (k0 + 1) * d) || !((k - 1) * d + 1 <= j && j <= k * d) {
        return Err(Error::InvalidInput("i or j outside the admissible blocks".into()));
    }
    let n = k * d;
    let all = range1(1, n);
    let lhs = abs_det_1(m, &minus(&all, &[i]), &minus(&all, &[j]));
    let middle_rows = minus(&range1((k0 - 1) * d + 1, (k0 + 1) * d), &[i]);
    let sigma_pool = range1((k0 - 2) * d + 1, k0 * d);
    let tau_pool = range1(k0 * d + 1, (k0 + 2) * d);
    let left_rows = range1(1, (k0 - 1) * d);
    let right_rows = range1((k0 + 1) * d + 1, n);
    let taus: Vec<(Vec<usize>, f64)> = combinations(tau_pool.len(), d - 1)
        .into_iter()
        .map(|tc| {
            let tau: Vec<usize> = tc.iter().map(|&x| tau_pool[x]).collect();
            let mut drop = tau.clone();
            drop.push(j);
            let mu = abs_det_1(m, &right_rows, &minus(&range1(k0 * d + 1, n), &drop));
            (tau, mu)
        })
        .collect();
    let mut rhs = 0.0;
    for sc in combinations(sigma_pool.len(), d) {
        let sigma: Vec<usize> = sc.iter().map(|&x| sigma_pool[x]).collect();
        let mu_sigma = abs_det_1(m, &left_rows, &minus(&range1(1, k0 * d), &sigma));
        if mu_sigma == 0.0 {
            continue;
        }
        for (tau, mu_tau) in &taus {
            let mut cols = sigma.clone();
            cols.extend(tau);
            let mid = abs_det_1(m, &middle_rows, &cols);
            rhs += mid * mu_sigma * mu_tau;
        }
    }
    Ok(BlockMinorReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-10) })
}

/// Largest |det|/(Hadamard bound) over the index patterns that must vanish
/// identically: middle-row determinants with a column outside
/// [(k0−2)d+1, (k0+2)d], and complementary determinants with more than d
/// columns taken from the left pool or more than d−1 from the right pool.
pub fn structural_zero_max(m: &DMatrix<Complex64>, d: usize, k: usize, i: usize, j: usize, k0: usize) -> f64 {
    let n = k * d;
    let hadamard = |rows: &[usize], cols: &[usize]| -> f64 {
        rows.iter()
            .map(|&r| cols.iter().map(|&c| m[(r - 1, c - 1)].norm_sqr()).sum::<f64>().sqrt())
            .product::<f64>()
            .max(f64::MIN_POSITIVE)
    };
    let middle_rows = minus(&range1((k0 - 1) * d + 1, (k0 + 1) * d), &[i]);
    let outer_rows = minus(&range1(1, n), &range1((k0 - 1) * d + 1, (k0 + 1) * d));
    let window = range1((k0 - 2) * d + 1, (k0 + 2) * d);
    let mut worst: f64 = 0.0;
    // Columns reaching outside the window (one far column swapped in).
    for far in [(k0 - 2) * d, (k0 + 2) * d + 1].into_iter().filter(|&c| (1..=n).contains(&c)) {
        for base in combinations(window.len(), 2 * d - 2) {
            let mut g: Vec<usize> = base.iter().map(|&x| window[x]).collect();
            g.push(far);
            g.sort_unstable();
            let h = hadamard(&middle_rows, &g);
            worst = worst.max(abs_det_1(m, &middle_rows, &g) / h);
        }
    }
    // Unbalanced choices inside the window.
    let left_pool = range1((k0 - 2) * d + 1, k0 * d);
    for gc in combinations(window.len(), 2 * d - 1) {
        let g: Vec<usize> = gc.iter().map(|&x| window[x]).collect();
        let nl = g.iter().filter(|x| left_pool.contains(x)).count();
        let nr = g.len() - nl;
        if nl > d || nr > d - 1 {
            let mut drop = g.clone();
            drop.push(j);
            let cols = minus(&range1(1, n), &drop);
            if cols.len() != outer_rows.len() {
                continue;
            }
            let h = hadamard(&outer_rows, &cols);
            worst = worst.max(abs_det_1(m, &outer_rows, &cols) / h);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeratorEntry {
    pub y: i64,
    pub log_abs_mu: f64,
    pub log_bound: f64,
    pub margin: f64,
    pub log_abs_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeratorReport {
    pub x1: i64,
    pub x2: i64,
    pub x: i64,
    pub epsilon: f64,
    pub log_c: f64,
    pub gammas: Vec<f64>,
    pub entries: Vec<NumeratorEntry>,
    pub min_margin: f64,
    /// −slope of ln|G_I(x, y)| against y.
    pub green_decay_rate: f64,
}

/// Compares |μ_{x,y}| with the exponential numerator bound built from the
/// Lyapunov exponents `gammas` (γ_1 ≥ … ≥ γ_d), with C = e^{εk}.
#[allow(clippy::too_many_arguments)]
pub fn numerator_bound_check(
    v: &TrigPolynomial,
    alpha: f64,
    theta: f64,
    energy: f64,
    x1: i64,
    blocks: usize,
    x: i64,
    ys: &[i64],
    eps: f64,
    gammas: &[f64],
) -> Result<NumeratorReport> {
    let d = v.degree();
    if blocks < 30 || gammas.len() < d {
        return Err(Error::InvalidInput("need ≥ 30 blocks and d exponents".into()));
    }
    let x2 = x1 + (blocks * d) as i64 - 1;
    if x < x1 || x > x1 + d as i64 - 1 {
        return Err(Error::IndexOutOfRange { index: x, lo: x1, hi: x1 + d as i64 - 1 });
    }
    let pairs: Vec<(i64, i64)> = ys.iter().map(|&y| (x, y)).collect();
    let table = greens(v, alpha, Complex64::new(theta, 0.0), energy, x1, x2, &pairs)?;
    let lvd = v.leading().norm().ln();
    let s_lo: f64 = gammas[..d - 1].iter().sum();
    let s_hi: f64 = gammas[..d].iter().sum();
    let log_c = eps * blocks as f64;
    let mut entries = Vec::new();
    for g in &table.entries {
        let y = g.y;
        let log_bound = log_c
            + (s_lo + lvd + eps) * (y - x1).abs() as f64
            + (s_hi + lvd + eps) * (y - x2).abs() as f64;
        entries.push(NumeratorEntry {
            y,
            log_abs_mu: g.minor.log_abs,
            log_bound,
            margin: log_bound - g.minor.log_abs,
            log_abs_g: g.minor.log_abs - table.denominator.log_abs,
        });
    }
    let min_margin = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    let yf: Vec<f64> = entries.iter().map(|e| e.y as f64).collect();
    let lg: Vec<f64> = entries.iter().map(|e| e.log_abs_g).collect();
    let green_decay_rate = if entries.len() >= 2 { -linear_fit(&yf, &lg).0 } else { f64::NAN };
    Ok(NumeratorReport {
        x1,
        x2,
        x,
        epsilon: eps,
        log_c,
        gammas: gammas.to_vec(),
        entries,
        min_margin,
        green_decay_rate,
    })
}
