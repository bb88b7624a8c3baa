use crate::numeric::LogDet;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Complex banded matrix with `kl` sub- and `ku` super-diagonals, stored
/// column-major with `kl` extra rows of headroom for LU fill-in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, ldab, ab: vec![ZERO; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            ZERO
        }
    }

    /// Sets an entry; panics outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                let lo = j.saturating_sub(self.ku);
                let hi = (j + self.kl).min(self.n - 1);
                (lo..=hi).map(|i| self.ab[self.idx(i, j)].norm()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(mut self) -> BandedLu {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut singular = false;
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in j + 1..=last {
                let v = self.ab[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = p;
            if best == 0.0 {
                singular = true;
                continue;
            }
            let cmax = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    let a = self.idx(j, c);
                    let b = self.idx(p, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in j + 1..=last {
                let ij = self.idx(i, j);
                let l = self.ab[ij] / pivot;
                self.ab[ij] = l;
                if l == ZERO {
                    continue;
                }
                for c in j + 1..=cmax {
                    let u = self.ab[self.idx(j, c)];
                    let ic = self.idx(i, c);
                    self.ab[ic] -= l * u;
                }
            }
        }
        BandedLu { m: self, piv, singular }
    }
}

/// Factored banded matrix: `M_{n-1} ⋯ M_0 A = U`, `M_j = L_j^{-1} P_j`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
    singular: bool,
}

impl BandedLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.m.ab[self.m.idx(i, j)]
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn log_det(&self) -> LogDet {
        if self.singular {
            return LogDet::ZERO;
        }
        let mut out = LogDet::ONE;
        for j in 0..self.m.n {
            out = out.mul(&LogDet::from_complex(self.at(j, j)));
            if self.piv[j] != j {
                out = out.neg();
            }
        }
        out
    }

    fn upper_range(&self, j: usize) -> std::ops::Range<usize> {
        j.saturating_sub(self.m.kl + self.m.ku)..j
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.m.n;
        let kl = self.m.kl;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            for i in j + 1..=(j + kl).min(n - 1) {
                x[i] -= self.at(i, j) * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.at(j, j);
            let xj = x[j];
            for i in self.upper_range(j) {
                x[i] -= self.at(i, j) * xj;
            }
        }
        x
    }

    /// Solves A^H x = c.
    pub fn solve_adjoint(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = self.m.n;
        let kl = self.m.kl;
        let mut y = c.to_vec();
        for j in 0..n {
            let mut s = y[j];
            for i in self.upper_range(j) {
                s -= self.at(i, j).conj() * y[i];
            }
            y[j] = s / self.at(j, j).conj();
        }
        for j in (0..n).rev() {
            let mut s = ZERO;
            for i in j + 1..=(j + kl).min(n - 1) {
                s += self.at(i, j).conj() * y[i];
            }
            y[j] -= s;
            y.swap(j, self.piv[j]);
        }
        y
    }

    /// Hager–Higham estimate of ‖A^{-1}‖_1.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.m.n;
        if self.singular {
            return f64::INFINITY;
        }
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.norm()).sum::<f64>();
            let xi: Vec<Complex64> = y
                .iter()
                .map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![ZERO; n];
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        // Alternating-sign probe guards against the estimator stalling.
        let alt: Vec<Complex64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }
}
