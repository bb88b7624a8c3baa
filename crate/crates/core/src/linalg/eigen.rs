use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of the real symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (implicit QL with Wilkinson shifts), ascending.
pub fn tridiag_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    assert!(n == 0 || e.len() + 1 == n);
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().cloned().chain(std::iter::once(0.0)).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m as isize - 1;
            while i >= l as isize {
                let iu = i as usize;
                let f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                i -= 1;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// Number of eigenvalues below `sigma` of the n×n Hermitian matrix with
/// half-bandwidth `b` whose entries are given by `entry(i, j)` (|i−j| ≤ b),
/// by Sylvester inertia of an unpivoted LDL^H factorization.
pub fn banded_sturm_count<F>(n: usize, b: usize, entry: F, sigma: f64) -> usize
where
    F: Fn(usize, usize) -> Complex64,
{
    let w = b + 1;
    // Row i of L stored at ring slot i % w; lrow[k] = L(i, i-b+k).
    let mut lrows = vec![vec![Complex64::new(0.0, 0.0); b]; w];
    let mut dvals = vec![0.0f64; w];
    let mut count = 0;
    for i in 0..n {
        let slot = i % w;
        let mut row = vec![Complex64::new(0.0, 0.0); b];
        let j0 = i.saturating_sub(b);
        for j in j0..i {
            let mut s = entry(i, j);
            let jslot = j % w;
            let kstart = j0.max(j.saturating_sub(b));
            for k in kstart..j {
                let lik = row[k + b - i];
                let ljk = lrows[jslot][k + b - j];
                s -= lik * dvals[k % w] * ljk.conj();
            }
            row[j + b - i] = s / dvals[jslot];
        }
        let aii = entry(i, i).re;
        let mut di = aii - sigma;
        for k in j0..i {
            di -= row[k + b - i].norm_sqr() * dvals[k % w];
        }
        // A vanishing pivot means σ is (numerically) an eigenvalue of the
        // leading block; nudge it the way a tiny shift of σ would.
        let tiny = 1e-14 * (1.0 + aii.abs() + sigma.abs());
        if di.abs() < tiny {
            di = -tiny;
        }
        if di < 0.0 {
            count += 1;
        }
        dvals[slot] = di;
        lrows[slot] = row;
    }
    count
}

/// The k-th smallest eigenvalue (k from 0) by bisection on a counting function,
/// inside the bracket [lo, hi] that must contain the whole spectrum.
pub fn kth_eigenvalue<C>(count_below: C, k: usize, mut lo: f64, mut hi: f64) -> f64
where
    C: Fn(f64) -> usize,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a dense Hermitian matrix.
pub fn dense_hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}
