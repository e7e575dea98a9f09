//! Block diagonal views and the algebra of block diagonalizers.
//!
//! A diagonalizer `W` is normalized when `Bdiag(W^T W) = I`, i.e. every column
//! group `W_j` has orthonormal columns. Two normalized diagonalizers are
//! equivalent when `W' = W D P` with `D` block diagonal orthogonal and `P` a
//! permutation that maps blocks onto blocks of the same size.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::partition::Partition;

/// Default absolute Frobenius tolerance for [`is_member_w`].
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Relative threshold below which a diagonalizer is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Block diagonal part `diag(A_11, ..., A_tt)`.
pub fn bdiag(a: &DMatrix<f64>, tau: &Partition) -> Result<DMatrix<f64>> {
    tau.check_square(a.nrows(), a.ncols())?;
    let mut out = DMatrix::zeros(tau.n(), tau.n());
    for j in 0..tau.t() {
        let (o, s) = (tau.offset(j), tau.size(j));
        out.view_mut((o, o), (s, s))
            .copy_from(&a.view((o, o), (s, s)));
    }
    Ok(out)
}

/// Off-block part `A - bdiag(A)`.
pub fn offbdiag(a: &DMatrix<f64>, tau: &Partition) -> Result<DMatrix<f64>> {
    tau.check_square(a.nrows(), a.ncols())?;
    let mut out = a.clone();
    for j in 0..tau.t() {
        let (o, s) = (tau.offset(j), tau.size(j));
        out.view_mut((o, o), (s, s)).fill(0.0);
    }
    Ok(out)
}

/// Squared Frobenius norm of the off-block part, without materializing it.
pub fn offbdiag_norm_sq(a: &DMatrix<f64>, tau: &Partition) -> f64 {
    let labels = tau.labels();
    let mut acc = 0.0;
    for (c, col) in a.column_iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            if labels[r] != labels[c] {
                acc += x * x;
            }
        }
    }
    acc
}

/// Diagonal block `j` of `a`, copied out.
pub fn diag_block(a: &DMatrix<f64>, tau: &Partition, j: usize) -> DMatrix<f64> {
    let (o, s) = (tau.offset(j), tau.size(j));
    a.view((o, o), (s, s)).into_owned()
}

/// Column group `j` of `w`.
pub fn column_group(w: &DMatrix<f64>, tau: &Partition, j: usize) -> DMatrix<f64> {
    w.columns(tau.offset(j), tau.size(j)).into_owned()
}

fn block_gram_deviation(w: &DMatrix<f64>, tau: &Partition) -> f64 {
    let mut acc = 0.0;
    for j in 0..tau.t() {
        let wj = w.columns(tau.offset(j), tau.size(j));
        let g = wj.transpose() * wj;
        for (idx, x) in g.iter().enumerate() {
            let d = if idx % (tau.size(j) + 1) == 0 {
                x - 1.0
            } else {
                *x
            };
            acc += d * d;
        }
    }
    libm::sqrt(acc)
}

/// Rescales `w` into `W_tau`: `W [Bdiag(W^T W)]^{-1/2}`, blockwise.
pub fn normalize_to_w(w: &DMatrix<f64>, tau: &Partition) -> Result<DMatrix<f64>> {
    tau.check_square(w.nrows(), w.ncols())?;
    linalg::ensure_nonsingular(w, SINGULAR_TOL)?;
    let mut out = w.clone();
    for j in 0..tau.t() {
        let wj = w.columns(tau.offset(j), tau.size(j)).into_owned();
        out.columns_mut(tau.offset(j), tau.size(j))
            .copy_from(&linalg::polar_factor(&wj)?);
    }
    Ok(out)
}

/// `true` iff `w` is nonsingular and `||Bdiag(W^T W) - I||_F <= tol`.
pub fn is_member_w(w: &DMatrix<f64>, tau: &Partition, tol: f64) -> bool {
    if tau.check_square(w.nrows(), w.ncols()).is_err() {
        return false;
    }
    if block_gram_deviation(w, tau) > tol {
        return false;
    }
    linalg::ensure_nonsingular(w, SINGULAR_TOL).is_ok()
}

/// Errors with [`Error::NotMember`] unless `w` passes [`is_member_w`].
pub fn ensure_member_w(w: &DMatrix<f64>, tau: &Partition, tol: f64) -> Result<()> {
    tau.check_square(w.nrows(), w.ncols())?;
    let deviation = block_gram_deviation(w, tau);
    if deviation > tol {
        return Err(Error::NotMember { deviation });
    }
    linalg::ensure_nonsingular(w, SINGULAR_TOL)?;
    Ok(())
}

/// A block-preserving permutation in factored form.
///
/// Block `(pi(j), j)` of the expanded matrix holds the `n_j x n_j` permutation
/// matrix of `inner[j]`; every other block is zero. Column `c` of that inner
/// permutation matrix is the unit vector `e_{inner[j][c]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    blockmap: Vec<usize>,
    inner: Vec<Vec<usize>>,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = alloc::vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

impl BlockPermutation {
    pub fn new(tau: &Partition, blockmap: Vec<usize>, inner: Vec<Vec<usize>>) -> Result<Self> {
        if blockmap.len() != tau.t() || inner.len() != tau.t() {
            return Err(Error::InvalidPermutation("length differs from block count"));
        }
        if !is_permutation(&blockmap) {
            return Err(Error::InvalidPermutation("block map is not a permutation"));
        }
        for (j, &pj) in blockmap.iter().enumerate() {
            if tau.size(j) != tau.size(pj) {
                return Err(Error::InvalidPermutation("block sizes not preserved"));
            }
            if inner[j].len() != tau.size(j) || !is_permutation(&inner[j]) {
                return Err(Error::InvalidPermutation("inner permutation malformed"));
            }
        }
        Ok(Self { blockmap, inner })
    }

    pub fn identity(tau: &Partition) -> Self {
        Self {
            blockmap: (0..tau.t()).collect(),
            inner: tau.sizes().iter().map(|&s| (0..s).collect()).collect(),
        }
    }

    /// Block permutation with identity inner permutations.
    pub fn from_blockmap(tau: &Partition, blockmap: Vec<usize>) -> Result<Self> {
        let inner = tau.sizes().iter().map(|&s| (0..s).collect()).collect();
        Self::new(tau, blockmap, inner)
    }

    pub fn blockmap(&self) -> &[usize] {
        &self.blockmap
    }

    pub fn inner(&self) -> &[Vec<usize>] {
        &self.inner
    }

    /// Dense `n x n` permutation matrix.
    pub fn to_dense(&self, tau: &Partition) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(tau.n(), tau.n());
        for (j, &pj) in self.blockmap.iter().enumerate() {
            let (row0, col0) = (tau.offset(pj), tau.offset(j));
            for (c, &r) in self.inner[j].iter().enumerate() {
                p[(row0 + r, col0 + c)] = 1.0;
            }
        }
        p
    }

    /// `w * P` computed by column gathering.
    pub fn apply_right(&self, w: &DMatrix<f64>, tau: &Partition) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(w.nrows(), w.ncols());
        for (j, &pj) in self.blockmap.iter().enumerate() {
            for (c, &r) in self.inner[j].iter().enumerate() {
                out.set_column(tau.offset(j) + c, &w.column(tau.offset(pj) + r));
            }
        }
        out
    }
}

/// Block diagonal orthogonal factor `diag(D_1, ..., D_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOrthogonal {
    blocks: Vec<DMatrix<f64>>,
}

impl BlockOrthogonal {
    pub fn new(tau: &Partition, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != tau.t() {
            return Err(Error::DimensionMismatch {
                expected: tau.t(),
                found: blocks.len(),
            });
        }
        for (j, b) in blocks.iter().enumerate() {
            let nj = tau.size(j);
            if b.nrows() != nj || b.ncols() != nj {
                return Err(Error::DimensionMismatch {
                    expected: nj,
                    found: b.nrows().max(b.ncols()),
                });
            }
            let deviation = (b.transpose() * b - DMatrix::identity(nj, nj)).norm();
            if deviation > 1e-12 * nj as f64 {
                return Err(Error::NotOrthogonal {
                    block: j,
                    deviation,
                });
            }
        }
        Ok(Self { blocks })
    }

    pub fn identity(tau: &Partition) -> Self {
        Self {
            blocks: tau
                .sizes()
                .iter()
                .map(|&s| DMatrix::identity(s, s))
                .collect(),
        }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn to_dense(&self, tau: &Partition) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(tau.n(), tau.n());
        for (j, b) in self.blocks.iter().enumerate() {
            let o = tau.offset(j);
            d.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(b);
        }
        d
    }

    /// `w * D` computed column group by column group.
    pub fn apply_right(&self, w: &DMatrix<f64>, tau: &Partition) -> DMatrix<f64> {
        let mut out = w.clone();
        for (j, b) in self.blocks.iter().enumerate() {
            let cols = w.columns(tau.offset(j), tau.size(j)) * b;
            out.columns_mut(tau.offset(j), tau.size(j)).copy_from(&cols);
        }
        out
    }
}

/// `W D P` for a block orthogonal `D` and block-preserving `P`.
pub fn apply_equivalence(
    w: &DMatrix<f64>,
    tau: &Partition,
    d: &BlockOrthogonal,
    p: &BlockPermutation,
) -> Result<DMatrix<f64>> {
    tau.check_square(w.nrows(), w.ncols())?;
    if d.blocks.len() != tau.t() || p.blockmap.len() != tau.t() {
        return Err(Error::DimensionMismatch {
            expected: tau.t(),
            found: d.blocks.len().min(p.blockmap.len()),
        });
    }
    Ok(p.apply_right(&d.apply_right(w, tau), tau))
}
