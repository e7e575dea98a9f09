//! Perturbation analysis for the joint block diagonalization problem.
//!
//! Given matrices `A_1, ..., A_m` and a partition `tau = (n_1, ..., n_t)`, a
//! block diagonalizer is a nonsingular `W` making every `W^T A_i W` block
//! diagonal. This crate computes the structured moduli that certify
//! uniqueness of `W`, residuals and backward errors of an approximate
//! diagonalizer, the a-priori forward error bound and condition number, the
//! alignment distance between two diagonalizers, an iterative solver, and a
//! seeded instance generator.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod alignment;
pub mod block;
pub mod error;
pub mod instance;
pub mod kron;
pub mod linalg;
pub mod moduli;
pub mod partition;
pub mod perturbation;
pub mod random;
pub mod solver;

pub use alignment::{align, AlignmentResult};
pub use block::{
    apply_equivalence, bdiag, is_member_w, normalize_to_w, offbdiag, BlockOrthogonal,
    BlockPermutation, MEMBERSHIP_TOL,
};
pub use error::{Error, Result};
pub use instance::{generate, InstanceBundle};
pub use moduli::{compute_moduli, DiagonalizedSet, ModuliReport};
pub use partition::Partition;
pub use perturbation::{
    backward_error, condition_number, default_gamma, forward_error_terms, residuals, select_gamma,
    AnalysisInput, AnalysisReport, GammaSpec,
};
pub use solver::{solve, SolverConfig, SolverInit, SolverOutcome, StopReason};

/// An ordered collection of square matrices of a common order.
pub type MatrixSet = alloc::vec::Vec<nalgebra::DMatrix<f64>>;

/// `(sum_i ||A_i||_F^2)^{1/2}`.
pub fn set_norm(a: &[nalgebra::DMatrix<f64>]) -> f64 {
    libm::sqrt(a.iter().map(linalg::frobenius_sq).sum())
}
