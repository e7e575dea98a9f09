//! Structured matrices of a block diagonalized set and the two moduli.
//!
//! For a set already in block diagonal form, `G_jk` encodes the coupled
//! equations between diagonal blocks `j` and `k`; its smallest singular value
//! measures how far the pair is from admitting a nontrivial mixing solution.
//! `G_jj` encodes the single-block equations: `vec(I)` always lies in its
//! kernel, and a positive second-smallest singular value certifies that the
//! block cannot be split further.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::block;
use crate::error::{Error, Result};
use crate::kron::{kron_eye_left, kron_eye_right, perfect_shuffle};
use crate::linalg::{self, UNIT_ROUNDOFF};
use crate::partition::Partition;

/// The diagonal blocks `A_i^{(jj)}` of a block diagonal matrix set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizedSet {
    tau: Partition,
    /// `blocks[i][j]` is block `j` of matrix `i`.
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl DiagonalizedSet {
    pub fn new(tau: Partition, blocks: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        for row in &blocks {
            if row.len() != tau.t() {
                return Err(Error::DimensionMismatch {
                    expected: tau.t(),
                    found: row.len(),
                });
            }
            for (j, b) in row.iter().enumerate() {
                if b.nrows() != tau.size(j) || b.ncols() != tau.size(j) {
                    return Err(Error::DimensionMismatch {
                        expected: tau.size(j),
                        found: b.nrows().max(b.ncols()),
                    });
                }
            }
        }
        Ok(Self { tau, blocks })
    }

    /// Diagonal blocks of each `a_i`; off-block entries are ignored.
    pub fn from_block_diagonal(a: &[DMatrix<f64>], tau: &Partition) -> Result<Self> {
        let mut blocks = Vec::with_capacity(a.len());
        for ai in a {
            tau.check_square(ai.nrows(), ai.ncols())?;
            blocks.push(
                (0..tau.t())
                    .map(|j| block::diag_block(ai, tau, j))
                    .collect(),
            );
        }
        Self::new(tau.clone(), blocks)
    }

    /// Diagonal blocks of `W^T a_i W`.
    pub fn from_diagonalizer(
        a: &[DMatrix<f64>],
        w: &DMatrix<f64>,
        tau: &Partition,
    ) -> Result<Self> {
        tau.check_square(w.nrows(), w.ncols())?;
        let congruent: Vec<DMatrix<f64>> = a.iter().map(|ai| w.transpose() * ai * w).collect();
        Self::from_block_diagonal(&congruent, tau)
    }

    pub fn tau(&self) -> &Partition {
        &self.tau
    }

    /// Number of matrices.
    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i][j]
    }

    pub fn blocks(&self) -> &[Vec<DMatrix<f64>>] {
        &self.blocks
    }

    /// Appends matrices given by their diagonal blocks.
    pub fn extend(&mut self, other: &DiagonalizedSet) -> Result<()> {
        if other.tau != self.tau {
            return Err(Error::InvalidPartition("partitions differ"));
        }
        self.blocks.extend(other.blocks.iter().cloned());
        Ok(())
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        let t = self.tau.t();
        if j >= k || k >= t {
            return Err(Error::BlockIndex { j, k, t });
        }
        Ok(())
    }
}

/// `G_jk` for `j < k` (zero-based), of size `2 m n_j n_k x 2 n_j n_k`.
pub fn build_gjk(ds: &DiagonalizedSet, j: usize, k: usize) -> Result<DMatrix<f64>> {
    ds.check_pair(j, k)?;
    let (nj, nk) = (ds.tau.size(j), ds.tau.size(k));
    let p = nj * nk;
    let mut g = DMatrix::zeros(2 * ds.m() * p, 2 * p);
    for (i, row) in ds.blocks.iter().enumerate() {
        let (aj, ak) = (&row[j], &row[k]);
        let r0 = 2 * i * p;
        g.view_mut((r0, 0), (p, p))
            .copy_from(&kron_eye_left(nk, aj));
        g.view_mut((r0, p), (p, p))
            .copy_from(&kron_eye_right(&ak.transpose(), nj));
        g.view_mut((r0 + p, 0), (p, p))
            .copy_from(&kron_eye_left(nk, &aj.transpose()));
        g.view_mut((r0 + p, p), (p, p))
            .copy_from(&kron_eye_right(ak, nj));
    }
    Ok(g)
}

/// `M_jk = sum_i [...]`, assembled from the Kronecker sum formula (equals `G_jk^T G_jk`).
pub fn build_mjk(ds: &DiagonalizedSet, j: usize, k: usize) -> Result<DMatrix<f64>> {
    ds.check_pair(j, k)?;
    let (nj, nk) = (ds.tau.size(j), ds.tau.size(k));
    let p = nj * nk;
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    for row in &ds.blocks {
        let (aj, ak) = (&row[j], &row[k]);
        let (ajt, akt) = (aj.transpose(), ak.transpose());
        let top_left = kron_eye_left(nk, &(&ajt * aj + aj * &ajt));
        let off = ak.kronecker(aj) + akt.kronecker(&ajt);
        let bottom_right = kron_eye_right(&(&akt * ak + ak * &akt), nj);
        let mut v = m.view_mut((0, 0), (p, p));
        v += &top_left;
        let mut v = m.view_mut((0, p), (p, p));
        v += &off;
        let mut v = m.view_mut((p, 0), (p, p));
        v += &off;
        let mut v = m.view_mut((p, p), (p, p));
        v += &bottom_right;
    }
    Ok(m)
}

/// `G_jj`, of size `m n_j^2 x n_j^2`.
pub fn build_gjj(ds: &DiagonalizedSet, j: usize) -> Result<DMatrix<f64>> {
    let t = ds.tau.t();
    if j >= t {
        return Err(Error::BlockIndex { j, k: j, t });
    }
    let nj = ds.tau.size(j);
    let q = nj * nj;
    let shuffle = perfect_shuffle(nj);
    let mut g = DMatrix::zeros(ds.m() * q, q);
    for (i, row) in ds.blocks.iter().enumerate() {
        let a = &row[j];
        let blk =
            kron_eye_left(nj, a) - shuffle.right_multiply(&kron_eye_right(&a.transpose(), nj));
        g.view_mut((i * q, 0), (q, q)).copy_from(&blk);
    }
    Ok(g)
}

/// Singular values at or below this are treated as zero.
pub fn rank_gap_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * UNIT_ROUNDOFF * 64.0
}

/// Both moduli and the per-block certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuliReport {
    /// `min_{j<k} sigma_min(G_jk)`; `+inf` when there is a single block.
    pub omega_uniq: f64,
    /// Smallest nonzero singular value of `G_jj` over blocks with `n_j > 1`; `+inf` for all-ones partitions.
    pub omega_robu: f64,
    /// `omega_robu` computed on the orthogonal complement of `vec(I)` instead of via the rank decision.
    pub omega_robu_complement: f64,
    /// `((j, k), sigma_min(G_jk))` for every `j < k`.
    pub per_pair_sigmas: Vec<((usize, usize), f64)>,
    /// `(j, second smallest singular value of G_jj)` for every block with `n_j > 1`.
    pub per_block_second_sigmas: Vec<(usize, f64)>,
    /// Every block with `n_j > 1` has a one-dimensional null space, i.e. it cannot be split further.
    pub nondivisible_certified: bool,
}

/// Orthonormal basis of the complement of `vec(I_n)` in `R^{n^2}` (Householder construction).
fn identity_complement_basis(n: usize) -> DMatrix<f64> {
    let q = n * n;
    let mut u = DVector::zeros(q);
    let inv = 1.0 / libm::sqrt(n as f64);
    for d in 0..n {
        u[d * (n + 1)] = inv;
    }
    // H maps e_1 onto u; its remaining columns span u^⊥
    let mut v = u.clone();
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let h = DMatrix::identity(q, q) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, q - 1).into_owned()
}

pub fn compute_moduli(ds: &DiagonalizedSet) -> Result<ModuliReport> {
    let tau = &ds.tau;
    let t = tau.t();
    let mut per_pair_sigmas = Vec::new();
    let mut omega_uniq = f64::INFINITY;
    for j in 0..t {
        for k in j + 1..t {
            let g = build_gjk(ds, j, k)?;
            let s = linalg::singular_values(&g)?;
            let smin = s.last().copied().unwrap_or(0.0);
            omega_uniq = omega_uniq.min(smin);
            per_pair_sigmas.push(((j, k), smin));
        }
    }

    let mut omega_robu = f64::INFINITY;
    let mut omega_robu_complement = f64::INFINITY;
    let mut per_block_second_sigmas = Vec::new();
    let mut certified = true;
    for j in 0..t {
        let nj = tau.size(j);
        if nj == 1 {
            continue;
        }
        let g = build_gjj(ds, j)?;
        let s = linalg::singular_values(&g)?;
        let smax = s.first().copied().unwrap_or(0.0);
        let thr = rank_gap_threshold(g.nrows(), g.ncols(), smax);
        let smallest_nonzero = s.iter().rev().copied().find(|&x| x > thr).unwrap_or(0.0);
        let second = s[s.len() - 2];
        per_block_second_sigmas.push((j, second));
        if !(second > thr) {
            certified = false;
        }
        omega_robu = omega_robu.min(smallest_nonzero);

        let restricted = &g * identity_complement_basis(nj);
        let sc = linalg::singular_values(&restricted)?;
        omega_robu_complement = omega_robu_complement.min(sc.last().copied().unwrap_or(0.0));
    }

    Ok(ModuliReport {
        omega_uniq,
        omega_robu,
        omega_robu_complement,
        per_pair_sigmas,
        per_block_second_sigmas,
        nondivisible_certified: certified,
    })
}
