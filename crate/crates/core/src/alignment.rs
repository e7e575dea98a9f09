//! Distance between two normalized diagonalizers modulo equivalence.
//!
//! Minimizes `||W - W~ D P||_F / ||W~||_F` over block diagonal orthogonal
//! `D` and block-preserving `P`. For a fixed block assignment `pi` the optimal
//! blocks of `D` are orthogonal Procrustes factors, and the attained value
//! depends on `pi` only through the sum of nuclear norms of `W_j^T W~_{pi(j)}`,
//! so `pi` is found by exhaustive search within each class of equal block sizes.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::block::{self, BlockOrthogonal, BlockPermutation, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::partition::Partition;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// `||W - W~ D P||_F / ||W~||_F` for the returned factors.
    pub error: f64,
    pub d: BlockOrthogonal,
    pub p: BlockPermutation,
    /// Optimal block assignment: column group `j` of `W` is matched with group `pi[j]` of `W~`.
    pub pi_assignment: Vec<usize>,
}

/// Score matrix `s[j][l] = ||W_j^T W~_l||_*` for equal-size blocks, `-inf` otherwise.
pub fn nuclear_scores(
    w: &DMatrix<f64>,
    w_tilde: &DMatrix<f64>,
    tau: &Partition,
) -> Result<Vec<Vec<f64>>> {
    let t = tau.t();
    let mut s = alloc::vec![alloc::vec![f64::NEG_INFINITY; t]; t];
    for j in 0..t {
        let wj = w.columns(tau.offset(j), tau.size(j));
        for l in 0..t {
            if tau.size(l) != tau.size(j) {
                continue;
            }
            let cross = wj.transpose() * w_tilde.columns(tau.offset(l), tau.size(l));
            s[j][l] = linalg::singular_values(&cross)?.iter().sum();
        }
    }
    Ok(s)
}

/// Advances `p` to the next permutation in lexicographic order; `false` after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut k = p.len() - 1;
    while p[k] <= p[i - 1] {
        k -= 1;
    }
    p.swap(i - 1, k);
    p[i..].reverse();
    true
}

/// Size-preserving assignment maximizing the total score.
///
/// Ties keep the lexicographically smallest assignment.
pub fn best_assignment(scores: &[Vec<f64>], tau: &Partition) -> Result<Vec<usize>> {
    let t = tau.t();
    let mut pi: Vec<usize> = (0..t).collect();
    let mut classes: Vec<usize> = tau.sizes().to_vec();
    classes.sort_unstable();
    classes.dedup();
    for size in classes {
        let members: Vec<usize> = (0..t).filter(|&j| tau.size(j) == size).collect();
        let mut order: Vec<usize> = (0..members.len()).collect();
        let mut best_score = f64::NEG_INFINITY;
        let mut best: Option<Vec<usize>> = None;
        loop {
            let score: f64 = members
                .iter()
                .zip(&order)
                .map(|(&j, &o)| scores[j][members[o]])
                .sum();
            if score > best_score {
                best_score = score;
                best = Some(order.clone());
            }
            if !next_permutation(&mut order) {
                break;
            }
        }
        let best = best.ok_or(Error::NoAssignment)?;
        for (&j, &o) in members.iter().zip(&best) {
            pi[j] = members[o];
        }
    }
    Ok(pi)
}

/// Aligns `w_tilde` to `w`; both must belong to `W_tau`.
pub fn align(w: &DMatrix<f64>, w_tilde: &DMatrix<f64>, tau: &Partition) -> Result<AlignmentResult> {
    block::ensure_member_w(w, tau, MEMBERSHIP_TOL)?;
    block::ensure_member_w(w_tilde, tau, MEMBERSHIP_TOL)?;
    let scores = nuclear_scores(w, w_tilde, tau)?;
    let pi = best_assignment(&scores, tau)?;

    let mut blocks: Vec<DMatrix<f64>> = tau
        .sizes()
        .iter()
        .map(|&s| DMatrix::identity(s, s))
        .collect();
    for (j, &l) in pi.iter().enumerate() {
        let cross = w_tilde.columns(tau.offset(l), tau.size(l)).transpose()
            * w.columns(tau.offset(j), tau.size(j));
        let (u, _, v) = linalg::svd_full(&cross)?;
        blocks[l] = u * v.transpose();
    }
    let d = BlockOrthogonal::new(tau, blocks)?;
    let p = BlockPermutation::from_blockmap(tau, pi.clone())?;
    let aligned = block::apply_equivalence(w_tilde, tau, &d, &p)?;
    let error = (w - aligned).norm() / w_tilde.norm();
    Ok(AlignmentResult {
        error,
        d,
        p,
        pi_assignment: pi,
    })
}
