//! Seeded randomness.
//!
//! All generators are ChaCha20 keyed by a 64-bit seed. Independent quantities
//! drawn from one seed use distinct ChaCha streams (see [`stream`]), so the
//! values of one stream do not depend on how many values another consumed.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::block::{self, BlockOrthogonal, BlockPermutation};
use crate::linalg;
use crate::partition::Partition;

pub type JbdRng = ChaCha20Rng;

pub fn rng(seed: u64) -> JbdRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for sub-stream `id` of `seed`.
pub fn stream(seed: u64, id: u64) -> JbdRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Derives a child seed from `(seed, a, b)`; used for per-trial seeds.
pub fn derive_seed(seed: u64, a: u32, b: u32) -> u64 {
    stream(seed, (u64::from(a) << 32) | u64::from(b)).next_u64()
}

pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    let mut m = DMatrix::zeros(rows, cols);
    for x in m.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    m
}

/// Random block diagonal matrix with standard normal blocks.
pub fn normal_block_diagonal<R: Rng + ?Sized>(rng: &mut R, tau: &Partition) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(tau.n(), tau.n());
    for j in 0..tau.t() {
        let (o, s) = (tau.offset(j), tau.size(j));
        let blk = normal_matrix(rng, s, s);
        d.view_mut((o, o), (s, s)).copy_from(&blk);
    }
    d
}

/// Standard normal matrix with each column group orthonormalized.
pub fn member_w<R: Rng + ?Sized>(rng: &mut R, tau: &Partition) -> DMatrix<f64> {
    let raw = normal_matrix(rng, tau.n(), tau.n());
    orthonormalize_groups(&raw, tau)
}

/// Replaces every column group by an orthonormal basis of its span.
pub fn orthonormalize_groups(w: &DMatrix<f64>, tau: &Partition) -> DMatrix<f64> {
    let mut out = w.clone();
    for j in 0..tau.t() {
        let q = linalg::orthonormalize_columns(&block::column_group(w, tau, j));
        out.columns_mut(tau.offset(j), tau.size(j)).copy_from(&q);
    }
    out
}

pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    linalg::orthonormalize_columns(&normal_matrix(rng, n, n))
}

pub fn block_orthogonal<R: Rng + ?Sized>(rng: &mut R, tau: &Partition) -> BlockOrthogonal {
    let blocks = tau.sizes().iter().map(|&s| orthogonal(rng, s)).collect();
    BlockOrthogonal::new(tau, blocks).expect("QR factors are orthogonal")
}

/// Uniformly random block-preserving permutation.
pub fn block_permutation<R: Rng + ?Sized>(rng: &mut R, tau: &Partition) -> BlockPermutation {
    let t = tau.t();
    let mut blockmap: Vec<usize> = (0..t).collect();
    let mut classes: Vec<usize> = tau.sizes().to_vec();
    classes.sort_unstable();
    classes.dedup();
    for size in classes {
        let members: Vec<usize> = (0..t).filter(|&j| tau.size(j) == size).collect();
        let mut targets = members.clone();
        targets.shuffle(rng);
        for (&j, &pj) in members.iter().zip(&targets) {
            blockmap[j] = pj;
        }
    }
    let inner = tau
        .sizes()
        .iter()
        .map(|&s| {
            let mut p: Vec<usize> = (0..s).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    BlockPermutation::new(tau, blockmap, inner).expect("size classes are preserved")
}

/// Uniform draw from the open interval `(lo, hi)`.
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return lo + (hi - lo) * u;
        }
    }
}
