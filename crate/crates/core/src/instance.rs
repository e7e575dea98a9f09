//! Seeded random instances with a known block diagonalizer.
//!
//! Stream layout for a seed: stream 0 draws `W`, streams `1..=m` draw the
//! block diagonal cores `D_i`, streams `m+1..=2m` draw the noise `N_i`.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::partition::Partition;
use crate::random;
use crate::MatrixSet;

const MIN_SIGMA: f64 = 1e-8;
const MAX_REDRAWS: u64 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub tau: Partition,
    pub a_clean: MatrixSet,
    pub a_noisy: MatrixSet,
    pub w_true: DMatrix<f64>,
    pub xi: f64,
    pub seed: u64,
}

impl InstanceBundle {
    pub fn m(&self) -> usize {
        self.a_clean.len()
    }

    /// `xi (sum_i ||N_i||_F^2)^{1/2}`, from the regenerated noise.
    pub fn delta_a(&self) -> f64 {
        if self.xi == 0.0 {
            return 0.0;
        }
        let s: f64 = noise_matrices(&self.tau, self.m(), self.seed)
            .iter()
            .map(linalg::frobenius_sq)
            .sum();
        self.xi * libm::sqrt(s)
    }

    /// `||A_noisy - A_clean||_F` over the whole set, as stored.
    pub fn measured_delta_a(&self) -> f64 {
        let s: f64 = self
            .a_noisy
            .iter()
            .zip(&self.a_clean)
            .map(|(x, y)| linalg::frobenius_sq(&(x - y)))
            .sum();
        libm::sqrt(s)
    }
}

fn draw_w(tau: &Partition, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = random::stream(seed, 0);
    let mut last = 0.0;
    for _ in 0..MAX_REDRAWS {
        let w = random::member_w(&mut rng, tau);
        let (smin, _) = linalg::extreme_singular_values(&w)?;
        if smin >= MIN_SIGMA {
            return Ok(w);
        }
        last = smin;
    }
    Err(Error::Singular {
        sigma_min: last,
        sigma_max: f64::NAN,
    })
}

/// The unscaled noise matrices `N_i` used by [`generate`] for this seed.
pub fn noise_matrices(tau: &Partition, m: usize, seed: u64) -> MatrixSet {
    let n = tau.n();
    (0..m)
        .map(|i| random::normal_matrix(&mut random::stream(seed, (m + 1 + i) as u64), n, n))
        .collect()
}

/// `A_i = V D_i V^T` with `V = W^{-T}`, and `A~_i = A_i + xi N_i`.
pub fn generate(tau: &Partition, m: usize, xi: f64, seed: u64) -> Result<InstanceBundle> {
    if m == 0 {
        return Err(Error::EmptySet);
    }
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidConfig(
            "noise level must be finite and nonnegative",
        ));
    }
    let w = draw_w(tau, seed)?;
    let v = linalg::inverse(&w.transpose())?;
    let a_clean: Vec<_> = (0..m)
        .map(|i| {
            let d = random::normal_block_diagonal(&mut random::stream(seed, (1 + i) as u64), tau);
            &v * d * v.transpose()
        })
        .collect();
    let a_noisy = if xi == 0.0 {
        a_clean.clone()
    } else {
        a_clean
            .iter()
            .zip(noise_matrices(tau, m, seed))
            .map(|(a, nz)| a + nz * xi)
            .collect()
    };
    Ok(InstanceBundle {
        tau: tau.clone(),
        a_clean,
        a_noisy,
        w_true: w,
        xi,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block;
    use alloc::vec;

    #[test]
    fn noiseless_copies_clean_set() {
        let tau = Partition::new(vec![1, 2]).unwrap();
        let b = generate(&tau, 3, 0.0, 9).unwrap();
        assert_eq!(b.a_clean, b.a_noisy);
        assert_eq!(b.delta_a(), 0.0);
        assert_eq!(b.measured_delta_a(), 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let tau = Partition::new(vec![2, 2]).unwrap();
        assert_eq!(
            generate(&tau, 4, 1e-6, 11).unwrap(),
            generate(&tau, 4, 1e-6, 11).unwrap()
        );
        assert_ne!(
            generate(&tau, 4, 1e-6, 11).unwrap(),
            generate(&tau, 4, 1e-6, 12).unwrap()
        );
    }

    #[test]
    fn true_w_diagonalizes_clean_set() {
        let tau = Partition::new(vec![3, 3, 3]).unwrap();
        let b = generate(&tau, 16, 1e-9, 2).unwrap();
        assert!(block::is_member_w(&b.w_true, &tau, 1e-12));
        for a in &b.a_clean {
            let off = libm::sqrt(block::offbdiag_norm_sq(
                &(b.w_true.transpose() * a * &b.w_true),
                &tau,
            ));
            assert!(off <= 1e-12 * a.norm(), "off-block norm {off}");
        }
    }

    #[test]
    fn noise_level_is_recorded_exactly() {
        let tau = Partition::new(vec![1, 2, 3]).unwrap();
        let b = generate(&tau, 5, 1e-7, 3).unwrap();
        let nz = noise_matrices(&tau, 5, 3);
        let expect = 1e-7 * libm::sqrt(nz.iter().map(linalg::frobenius_sq).sum::<f64>());
        assert!((b.delta_a() - expect).abs() <= 1e-12 * expect);
        // stored sums carry one rounding of A_i + xi N_i per entry
        let a_norm = crate::set_norm(&b.a_clean);
        let slack = 4.0 * linalg::UNIT_ROUNDOFF * a_norm;
        assert!(
            (b.measured_delta_a() - expect).abs() <= slack,
            "{} vs {expect}",
            b.measured_delta_a()
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        let tau = Partition::ones(2).unwrap();
        assert!(generate(&tau, 0, 0.0, 0).is_err());
        assert!(generate(&tau, 1, -1.0, 0).is_err());
        assert!(generate(&tau, 1, f64::NAN, 0).is_err());
    }
}
