//! Dense matrices, a cyclic Jacobi eigensolver for symmetric input, sample
//! covariance, and the seeded random stream every stochastic stage draws from.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix contains a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, NumericError> {
        if values.len() != rows * cols {
            return Err(NumericError::ShapeMismatch { rows, cols, len: values.len() });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericError::ShapeMismatch { rows: rows.len(), cols, len: r.len() });
            }
            values.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Plain triple-loop product. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.values[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    fn check_finite(&self) -> Result<(), NumericError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(NumericError::NonFinite(p / self.cols, p % self.cols)),
            None => Ok(()),
        }
    }
}

/// Eigen-decomposition `a = Q diag(Λ) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub q: Matrix,
}

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over every upper-triangular pair, annihilating `a[p][q]` with a plane
/// rotation, until the off-diagonal Frobenius norm falls below
/// `1e-12 * ‖a‖_F` (or is exactly zero). Eigenvalues come back sorted
/// descending (ties keep their diagonal order), and each eigenvector is
/// signed so that its first nonzero component is positive.
pub fn sym_eig(a: &Matrix) -> Result<SymEigen, NumericError> {
    let n = a.rows;
    if a.rows != a.cols {
        return Err(NumericError::NotSquare { rows: a.rows, cols: a.cols });
    }
    a.check_finite()?;
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (a.get(i, j), a.get(j, i));
            let gap = (x - y).abs();
            if gap > 1e-9 * x.abs().max(1.0) {
                return Err(NumericError::NotSymmetric { i, j, gap });
            }
        }
    }

    // Work on the symmetrised copy so tiny asymmetries do not leak into Q.
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_TOLERANCE * m.frobenius_norm();

    let off_norm = |m: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m.get(i, j) * m.get(i, j);
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(NumericError::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s, t);
            }
        }
        sweeps += 1;
        converged = off_norm(&m) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m.get(y, y).total_cmp(&m.get(x, x)));
    let eigenvalues = order.iter().map(|&k| m.get(k, k)).collect();
    let mut q = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let first = (0..n).map(|r| v.get(r, src)).find(|x| *x != 0.0).unwrap_or(0.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            q.set(r, dst, sign * v.get(r, src));
        }
    }
    Ok(SymEigen { eigenvalues, q })
}

// Applies the (p, q) rotation to both the working matrix and the accumulated
// eigenvectors. `t = tan(phi)` follows the Rutishauser update for the diagonal.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = m.rows;
    let apq = m.get(p, q);
    let tau = s / (1.0 + c);
    m.set(p, p, m.get(p, p) - t * apq);
    m.set(q, q, m.get(q, q) + t * apq);
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m.get(r, p);
        let arq = m.get(r, q);
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        m.set(r, p, new_rp);
        m.set(p, r, new_rp);
        m.set(r, q, new_rq);
        m.set(q, r, new_rq);
    }
    for r in 0..n {
        let vrp = v.get(r, p);
        let vrq = v.get(r, q);
        v.set(r, p, vrp - s * (vrq + tau * vrp));
        v.set(r, q, vrq + s * (vrp - tau * vrq));
    }
}

/// Per-column means of an `n x d` sample matrix.
pub fn column_means(x: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols];
    for r in 0..x.rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    let n = x.rows as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Unbiased (`n - 1`) sample covariance of the rows of `x`.
pub fn covariance(x: &Matrix) -> Result<Matrix, NumericError> {
    if x.rows < 2 {
        return Err(NumericError::TooFewSamples { needed: 2, got: x.rows });
    }
    let d = x.cols;
    let mean = column_means(x);
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in 0..x.rows {
        for ((c, v), m) in centered.iter_mut().zip(x.row(r)).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let dst = &mut cov.values[i * d..(i + 1) * d];
            for j in i..d {
                dst[j] += ci * centered[j];
            }
        }
    }
    let denom = (x.rows - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(cov)
}

/// Seeded, platform-independent random stream (ChaCha12 keyed from the seed).
///
/// Sub-streams are derived with [`RngStream::substream`], which depends only
/// on the parent seed and the stream id, never on how much the parent has
/// been consumed. That keeps per-tree and per-permutation draws identical
/// whether work runs serially or in parallel.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
}

// SplitMix64 finaliser, used to spread seeds and stream ids.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `(self.seed, id)`.
    pub fn substream(&self, id: u64) -> RngStream {
        RngStream::new(mix64(self.seed ^ mix64(id.wrapping_add(0x5EED))))
    }

    /// Uniform integer in `0..bound` (Lemire's nearly-divisionless method).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut m = (self.rng.next_u64() as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = (self.rng.next_u64() as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    pub fn index(&mut self, bound: usize) -> usize {
        self.below(bound as u64) as usize
    }

    /// Uniform `f64` in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform `f64` in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, values: &mut [T]) {
        for i in (1..values.len()).rev() {
            let j = self.index(i + 1);
            values.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Returns a Fisher–Yates permutation of `values` driven by `rng`.
pub fn permute<T: Clone>(values: &[T], rng: &mut RngStream) -> Vec<T> {
    let mut out = values.to_vec();
    rng.shuffle(&mut out);
    out
}
