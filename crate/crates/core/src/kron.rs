//! Vectorization, Kronecker products and the perfect shuffle.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-major stacking of `x`.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`].
pub fn reshape(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            found: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `I_n ⊗ b`.
pub fn kron_eye_left(n: usize, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = b.shape();
    let mut out = DMatrix::zeros(n * r, n * c);
    for k in 0..n {
        out.view_mut((k * r, k * c), (r, c)).copy_from(b);
    }
    out
}

/// `a ⊗ I_n`.
pub fn kron_eye_right(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(r * n, c * n);
    for q in 0..c {
        for p in 0..r {
            let x = a[(p, q)];
            if x != 0.0 {
                for d in 0..n {
                    out[(p * n + d, q * n + d)] = x;
                }
            }
        }
    }
    out
}

/// The perfect shuffle `P` of order `n^2`, with `P vec(Z^T) = vec(Z)`.
///
/// Stored as an index map: `(P v)[i] = v[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShufflePermutation {
    n: usize,
    perm: Vec<usize>,
}

/// Builds the perfect shuffle for `n x n` blocks.
pub fn perfect_shuffle(n: usize) -> ShufflePermutation {
    let mut perm = alloc::vec![0; n * n];
    for b in 0..n {
        for a in 0..n {
            perm[a + b * n] = b + a * n;
        }
    }
    ShufflePermutation { n, perm }
}

impl ShufflePermutation {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.perm
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.perm.len(), self.perm.iter().map(|&i| v[i]))
    }

    /// `x * P`, as a column permutation of `x`.
    pub fn right_multiply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        // P[r, c] = 1 iff c = perm[r]; perm is an involution so column c of xP is column perm[c] of x
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (c, &src) in self.perm.iter().enumerate() {
            out.set_column(c, &x.column(src));
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.perm.len();
        let mut p = DMatrix::zeros(k, k);
        for (i, &j) in self.perm.iter().enumerate() {
            p[(i, j)] = 1.0;
        }
        p
    }
}
