use std::fmt;
use std::ops::Index;

use super::Mat;
use crate::error::{shape_err, Result};

/// Dense symmetric matrix.
///
/// The upper triangle is authoritative: every constructor mirrors it into the
/// lower triangle, so `s[(i, j)] == s[(j, i)]` holds bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = SymMat::zeros(n);
        for i in 0..n {
            s.data[i * n + i] = 1.0;
        }
        s
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut s = SymMat::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            s.set(i, i, *v);
        }
        s
    }

    /// `f(i, j)` is only queried for `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    /// Takes the upper triangle of a square matrix and mirrors it.
    pub fn from_upper(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return shape_err(format!("{}x{} is not square", m.rows(), m.cols()));
        }
        Ok(SymMat::from_fn(m.rows(), |i, j| m[(i, j)]))
    }

    /// `(m + mᵀ) / 2`.
    pub fn symmetrize(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return shape_err(format!("{}x{} is not square", m.rows(), m.cols()));
        }
        Ok(SymMat::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SymMat::from_upper(&Mat::from_rows(rows)?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_row_slice(self.n, self.n, &self.data).expect("square storage")
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `self ∘ other = trace(selfᵀ other)`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        assert_eq!(self.n, other.n, "inner dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, alpha: f64) -> SymMat {
        SymMat { n: self.n, data: self.data.iter().map(|v| alpha * v).collect() }
    }

    pub fn axpy(&mut self, alpha: f64, other: &SymMat) {
        assert_eq!(self.n, other.n, "axpy dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add_diag(&mut self, alpha: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += alpha;
        }
    }

    /// Principal sub-block `[start, start + len)`.
    pub fn principal(&self, start: usize, len: usize) -> SymMat {
        SymMat::from_fn(len, |i, j| self.get(start + i, start + j))
    }

    /// Writes `m` into the principal block at `offset`.
    pub fn set_principal(&mut self, offset: usize, m: &SymMat) {
        for i in 0..m.n {
            for j in i..m.n {
                self.set(offset + i, offset + j, m.get(i, j));
            }
        }
    }

    /// `Mᵀ S M`, symmetrised.
    pub fn congruence(&self, m: &Mat) -> SymMat {
        let t = m.transpose().matmul(&self.to_mat()).matmul(m);
        SymMat::symmetrize(&t).expect("square")
    }
}

impl Index<(usize, usize)> for SymMat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl From<&SymMat> for Mat {
    fn from(s: &SymMat) -> Mat {
        s.to_mat()
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.to_mat())
    }
}

/// Column-major lower-triangle vectorisation with off-diagonals scaled by
/// `√2`, so that `svec(A)·svec(B) = A ∘ B`.
///
/// Order for `n = 2`: `(1,1), (2,1), (2,2)`.
pub fn svec(s: &SymMat) -> Vec<f64> {
    let n = s.dim();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            if i == j {
                v.push(s.get(i, i));
            } else {
                v.push(std::f64::consts::SQRT_2 * s.get(i, j));
            }
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<SymMat> {
    let n = triangular_root(v.len())
        .ok_or_else(|| crate::Error::Shape(format!("{} is not a triangular number", v.len())))?;
    let mut s = SymMat::zeros(n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                s.set(i, i, v[k]);
            } else {
                s.set(i, j, v[k] / std::f64::consts::SQRT_2);
            }
            k += 1;
        }
    }
    Ok(s)
}

/// Position of entry `(i, j)` (either triangle) in the `svec` ordering.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    // the first c columns hold n + (n-1) + ... + (n-c+1) entries
    c * (2 * n - c + 1) / 2 + (r - c)
}

/// `Some(n)` when `len == n(n+1)/2`.
pub fn triangular_root(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n.saturating_sub(1)..=n + 1).find(|&k| k * (k + 1) / 2 == len)
}
