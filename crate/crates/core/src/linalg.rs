//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// Unit roundoff of IEEE double precision.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

fn svd(m: &DMatrix<f64>, vectors: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    m.clone()
        .try_svd(vectors, vectors, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let s = svd(m, false)?;
    let mut v: Vec<f64> = s.singular_values.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Thin SVD `m = U diag(s) V^T`, returned as `(U, s, V)`.
pub fn svd_full(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let s = svd(m, true)?;
    let u = s.u.ok_or(Error::NoConvergence)?;
    let v = s.v_t.ok_or(Error::NoConvergence)?.transpose();
    Ok((u, s.singular_values.iter().copied().collect(), v))
}

/// `(sigma_min, sigma_max)` of a nonempty matrix.
pub fn extreme_singular_values(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let s = singular_values(m)?;
    match (s.last(), s.first()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Ok((0.0, 0.0)),
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(extreme_singular_values(m)?.1)
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Rejects matrices whose smallest singular value is at most `rel_tol * ||m||_2`.
pub fn ensure_nonsingular(m: &DMatrix<f64>, rel_tol: f64) -> Result<(f64, f64)> {
    let (lo, hi) = extreme_singular_values(m)?;
    if !(lo > rel_tol * hi) || !(hi > 0.0) {
        return Err(Error::Singular {
            sigma_min: lo,
            sigma_max: hi,
        });
    }
    Ok((lo, hi))
}

/// Orthonormal polar factor `U V^T` of a full-column-rank `m = U diag(s) V^T`,
/// equal to `m (m^T m)^{-1/2}`.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (u, s, v) = svd_full(m)?;
    let hi = s.iter().fold(0.0f64, |a, &b| a.max(b));
    let lo = s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(lo > hi * 1e-14) {
        return Err(Error::Singular {
            sigma_min: lo,
            sigma_max: hi,
        });
    }
    Ok(u * v.transpose())
}

/// Solves `a x = b` by partial-pivot LU.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    a.clone().lu().solve(b).ok_or(Error::Singular {
        sigma_min: 0.0,
        sigma_max: f64::NAN,
    })
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve(a, &DMatrix::identity(a.nrows(), a.ncols()))
}

/// Orthonormal basis of the column span of `a` (full column rank assumed), via Householder QR.
pub fn orthonormalize_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}
