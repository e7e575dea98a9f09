//! Residuals, backward error, the forward error bound and the condition number.
//!
//! Everything here is parameterized by a choice of distinct weights
//! `gamma_1, ..., gamma_t` in `[-1, 1]` (one per block). The residual
//! `R_i = B_i G - G B_i` with `B_i = W~^T A~_i W~` and `G = diag(gamma_j I)`
//! vanishes exactly when `B_i` is block diagonal; its block `(j, k)` is
//! `(gamma_k - gamma_j) B_i^{(jk)}`.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;
use nalgebra::DMatrix;

use crate::alignment;
use crate::block::{self, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::moduli::{compute_moduli, DiagonalizedSet, ModuliReport};
use crate::partition::Partition;
use crate::random;
use crate::set_norm;

/// Smallest gap accepted for randomly drawn weights.
pub const MIN_RANDOM_GAP: f64 = 1e-3;

/// Distinct block weights `gamma_j`, `|gamma_j| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    gammas: Vec<f64>,
    gap: f64,
}

impl GammaSpec {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.len() < 2 {
            return Err(Error::TooFewBlocks);
        }
        if gammas.iter().any(|g| !(g.abs() <= 1.0)) {
            return Err(Error::InvalidGamma("weights must lie in [-1, 1]"));
        }
        let mut gap = f64::INFINITY;
        for (a, x) in gammas.iter().enumerate() {
            for y in &gammas[a + 1..] {
                gap = gap.min((x - y).abs());
            }
        }
        if !(gap > 0.0) {
            return Err(Error::InvalidGamma("weights must be distinct"));
        }
        Ok(Self { gammas, gap })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `g = min_{j != k} |gamma_j - gamma_k|`.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn t(&self) -> usize {
        self.gammas.len()
    }

    fn check(&self, tau: &Partition) -> Result<()> {
        if self.t() != tau.t() {
            return Err(Error::DimensionMismatch {
                expected: tau.t(),
                found: self.t(),
            });
        }
        Ok(())
    }
}

/// Equally spaced weights `-1, -1 + 2/(t-1), ..., 1`.
pub fn default_gamma(tau: &Partition) -> Result<GammaSpec> {
    let t = tau.t();
    if t < 2 {
        return Err(Error::TooFewBlocks);
    }
    let step = 2.0 / (t - 1) as f64;
    let mut gammas: Vec<f64> = (0..t).map(|j| -1.0 + step * j as f64).collect();
    gammas[t - 1] = 1.0;
    GammaSpec::new(gammas)
}

/// The constants `tau = (sqrt2 - 1)/sqrt(t - 1)` and `alpha = 2 tau / (sqrt2 + tau)^2`.
pub fn bound_constants(t: usize) -> (f64, f64) {
    let tau = (SQRT_2 - 1.0) / libm::sqrt((t - 1) as f64);
    let alpha = 2.0 * tau / ((SQRT_2 + tau) * (SQRT_2 + tau));
    (tau, alpha)
}

/// The forward bound as a function of `eps*`, or `None` outside its domain.
///
/// Evaluated as `(sqrt(t) eps + d/(1+s)) / s` with `d = 2 sqrt(t-1) eps + (t-1) eps^2`
/// and `s = sqrt(1 - d)`, which avoids cancellation for small `eps`.
pub fn forward_bound(eps_star: f64, t: usize) -> Option<f64> {
    if !(eps_star >= 0.0) || !eps_star.is_finite() {
        return None;
    }
    let tm1 = (t - 1) as f64;
    let d = 2.0 * libm::sqrt(tm1) * eps_star + tm1 * eps_star * eps_star;
    if !(d < 1.0) {
        return None;
    }
    let s = libm::sqrt(1.0 - d);
    Some((libm::sqrt(t as f64) * eps_star + d / (1.0 + s)) / s)
}

fn gamma_vector(gamma: &GammaSpec, tau: &Partition) -> Vec<f64> {
    tau.labels().into_iter().map(|j| gamma.gammas[j]).collect()
}

fn congruence(a: &[DMatrix<f64>], w: &DMatrix<f64>, tau: &Partition) -> Result<Vec<DMatrix<f64>>> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    tau.check_square(w.nrows(), w.ncols())?;
    a.iter()
        .map(|ai| {
            tau.check_square(ai.nrows(), ai.ncols())?;
            Ok(w.transpose() * ai * w)
        })
        .collect()
}

/// Residuals `R_i` and `r = (sum_i ||R_i||_F^2)^{1/2}`.
pub fn residuals(
    a_tilde: &[DMatrix<f64>],
    w_tilde: &DMatrix<f64>,
    gamma: &GammaSpec,
    tau: &Partition,
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    gamma.check(tau)?;
    linalg::ensure_nonsingular(w_tilde, block::SINGULAR_TOL)?;
    let gv = gamma_vector(gamma, tau);
    let mut total = 0.0;
    let rs = congruence(a_tilde, w_tilde, tau)?
        .into_iter()
        .map(|b| {
            let r = DMatrix::from_fn(b.nrows(), b.ncols(), |p, q| {
                b[(p, q)] * gv[q] - gv[p] * b[(p, q)]
            });
            total += linalg::frobenius_sq(&r);
            r
        })
        .collect();
    Ok((rs, libm::sqrt(total)))
}

/// An exact backward perturbation `E` and the bound on its relative size.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardError {
    /// `||W~^{-1}||_2^2 r / (g ||A~||_F)`.
    pub eps_berr: f64,
    /// `E_i` such that `W~` exactly block diagonalizes `A~_i + E_i`.
    pub perturbation: Vec<DMatrix<f64>>,
    pub r_tilde: f64,
}

/// Builds `E_i = W~^{-T} F_i W~^{-1}` with `F_i^{(jj)} = 0` and
/// `F_i^{(jk)} = -R_i^{(jk)} / (gamma_k - gamma_j)`, i.e. `F_i = -offbdiag(W~^T A~_i W~)`.
pub fn backward_error(
    a_tilde: &[DMatrix<f64>],
    w_tilde: &DMatrix<f64>,
    gamma: &GammaSpec,
    tau: &Partition,
) -> Result<BackwardError> {
    let (rs, r_tilde) = residuals(a_tilde, w_tilde, gamma, tau)?;
    let (smin, _) = linalg::extreme_singular_values(w_tilde)?;
    let winv = linalg::inverse(w_tilde)?;
    let gv = gamma_vector(gamma, tau);
    let labels = tau.labels();
    let perturbation = rs
        .iter()
        .map(|r| {
            let f = DMatrix::from_fn(r.nrows(), r.ncols(), |p, q| {
                if labels[p] == labels[q] {
                    0.0
                } else {
                    -r[(p, q)] / (gv[q] - gv[p])
                }
            });
            winv.transpose() * f * &winv
        })
        .collect();
    let eps_berr = r_tilde / (smin * smin * gamma.gap() * set_norm(a_tilde));
    Ok(BackwardError {
        eps_berr,
        perturbation,
        r_tilde,
    })
}

/// Norms derived from `Q = W^{-1} W~`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QFactors {
    pub kappa_q: f64,
    pub q_inv_norm: f64,
    pub w_norm: f64,
    pub w_tilde_norm: f64,
}

impl QFactors {
    pub fn new(w: &DMatrix<f64>, w_tilde: &DMatrix<f64>) -> Result<Self> {
        linalg::ensure_nonsingular(w, block::SINGULAR_TOL)?;
        let (_, w_tilde_norm) = linalg::ensure_nonsingular(w_tilde, block::SINGULAR_TOL)?;
        let q = linalg::solve(w, w_tilde)?;
        let (qmin, qmax) = linalg::extreme_singular_values(&q)?;
        Ok(Self {
            kappa_q: qmax / qmin,
            q_inv_norm: 1.0 / qmin,
            w_norm: linalg::spectral_norm(w)?,
            w_tilde_norm,
        })
    }

    /// `Q = I`, used when the true diagonalizer is unknown.
    pub fn unit(w_tilde_norm: f64) -> Self {
        Self {
            kappa_q: 1.0,
            q_inv_norm: 1.0,
            w_norm: w_tilde_norm,
            w_tilde_norm,
        }
    }
}

/// The quantities of the forward error bound for one weight choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub tau_const: f64,
    pub alpha_const: f64,
    pub delta: f64,
    pub eps_star: f64,
    /// Right-hand side of the applicability condition `delta < rhs`.
    pub rhs: f64,
    pub ratio: f64,
    pub condition_holds: bool,
    /// Defined only when the condition holds.
    pub eps_ub: Option<f64>,
}

/// Evaluates the bound given all scalar ingredients.
pub fn bound_terms(
    t: usize,
    gap: f64,
    r_tilde: f64,
    delta_a: f64,
    q: &QFactors,
    omega_uniq: f64,
    omega_robu: f64,
) -> BoundTerms {
    let (tau_const, alpha_const) = bound_constants(t);
    let delta = q.q_inv_norm * q.q_inv_norm * r_tilde
        + 2.0 * q.q_inv_norm * q.w_norm * q.w_tilde_norm * delta_a;
    let eps_star = tau_const * q.kappa_q * delta / (alpha_const * gap * omega_uniq);
    let mut rhs = alpha_const * gap * omega_uniq / q.kappa_q;
    if omega_robu.is_finite() {
        rhs = rhs.min((1.0 - 2.0 * alpha_const) * gap * omega_robu / SQRT_2);
    }
    let ratio = if rhs > 0.0 {
        delta / rhs
    } else {
        f64::INFINITY
    };
    let condition_holds = ratio < 1.0;
    let eps_ub = if condition_holds {
        forward_bound(eps_star, t)
    } else {
        None
    };
    BoundTerms {
        tau_const,
        alpha_const,
        delta,
        eps_star,
        rhs,
        ratio,
        condition_holds,
        eps_ub,
    }
}

/// Forward error bound for `W~` against the exact diagonalizer `W`.
#[allow(clippy::too_many_arguments)]
pub fn forward_error_terms(
    w: &DMatrix<f64>,
    w_tilde: &DMatrix<f64>,
    r_tilde: f64,
    delta_a: f64,
    gamma: &GammaSpec,
    tau: &Partition,
    omega_uniq: f64,
    omega_robu: f64,
) -> Result<BoundTerms> {
    gamma.check(tau)?;
    tau.check_square(w.nrows(), w.ncols())?;
    tau.check_square(w_tilde.nrows(), w_tilde.ncols())?;
    let q = QFactors::new(w, w_tilde)?;
    Ok(bound_terms(
        tau.t(),
        gamma.gap(),
        r_tilde,
        delta_a,
        &q,
        omega_uniq,
        omega_robu,
    ))
}

/// `(tau/alpha)(sqrt t + sqrt(t-1)) ||W||_2^2 ||A||_F / omega_uniq`.
pub fn condition_number_from(t: usize, w_norm: f64, a_norm: f64, omega_uniq: f64) -> f64 {
    if !(omega_uniq > 0.0) {
        return f64::INFINITY;
    }
    let (tau_c, alpha_c) = bound_constants(t);
    let tf = t as f64;
    tau_c / alpha_c * (libm::sqrt(tf) + libm::sqrt(tf - 1.0)) * w_norm * w_norm * a_norm
        / omega_uniq
}

/// Condition number of the set `a` with exact diagonalizer `w` in `W_tau`.
pub fn condition_number(a: &[DMatrix<f64>], w: &DMatrix<f64>, tau: &Partition) -> Result<f64> {
    if tau.t() < 2 {
        return Err(Error::TooFewBlocks);
    }
    block::ensure_member_w(w, tau, MEMBERSHIP_TOL)?;
    let ds = DiagonalizedSet::from_diagonalizer(a, w, tau)?;
    let moduli = compute_moduli(&ds)?;
    Ok(condition_number_from(
        tau.t(),
        linalg::spectral_norm(w)?,
        set_norm(a),
        moduli.omega_uniq,
    ))
}

/// The exact problem behind a perturbed one, when known.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub w: &'a DMatrix<f64>,
    pub a_clean: &'a [DMatrix<f64>],
}

/// Inputs for a full analysis of an approximate diagonalizer.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub a_tilde: &'a [DMatrix<f64>],
    pub w_tilde: &'a DMatrix<f64>,
    pub tau: &'a Partition,
    pub reference: Option<Reference<'a>>,
}

/// Bound quantities from moduli of `Bdiag(W~^T A~_i W~)`, with `Q = I` and no explicit perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedBound {
    pub omega_uniq: f64,
    pub omega_robu: f64,
    pub delta: f64,
    pub eps_star: f64,
    pub ratio: f64,
    pub condition_holds: bool,
    pub eps_ub: Option<f64>,
    pub cond_a: f64,
}

/// All derived quantities for one instance and one weight choice.
///
/// With a [`Reference`] the moduli, condition number and bound come from the
/// exact problem; without one they equal the `estimated` variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub gamma: Vec<f64>,
    pub g: f64,
    pub r_tilde: f64,
    pub delta_a: Option<f64>,
    pub delta: f64,
    pub tau_const: f64,
    pub alpha_const: f64,
    pub eps_star: f64,
    pub ratio: f64,
    pub condition_holds: bool,
    pub eps_ub: Option<f64>,
    pub eps_berr: f64,
    pub cond_a: f64,
    pub kappa_q: f64,
    pub q_inv_norm: f64,
    pub w_norm: Option<f64>,
    pub w_tilde_norm: f64,
    pub w_tilde_inv_norm: f64,
    pub a_norm: f64,
    pub a_tilde_norm: f64,
    pub omega_uniq: f64,
    pub omega_robu: f64,
    pub nondivisible_certified: bool,
    /// Alignment error against the reference diagonalizer.
    pub error: Option<f64>,
    pub estimated: EstimatedBound,
}

struct Oracle {
    moduli: ModuliReport,
    q: QFactors,
    delta_a: f64,
    a_norm: f64,
    cond_a: f64,
    error: f64,
}

/// Weight-independent part of an analysis, reusable across many `gamma`.
pub struct Analysis {
    t: usize,
    /// `pair_off[j][k] = sum_i ||B_i^{(jk)}||_F^2`
    pair_off: Vec<Vec<f64>>,
    w_tilde_norm: f64,
    w_tilde_inv_norm: f64,
    a_tilde_norm: f64,
    estimated_moduli: ModuliReport,
    estimated_cond: f64,
    oracle: Option<Oracle>,
}

impl Analysis {
    pub fn prepare(input: &AnalysisInput<'_>) -> Result<Self> {
        let tau = input.tau;
        let t = tau.t();
        if t < 2 {
            return Err(Error::TooFewBlocks);
        }
        let (smin, smax) = linalg::ensure_nonsingular(input.w_tilde, block::SINGULAR_TOL)?;
        let b = congruence(input.a_tilde, input.w_tilde, tau)?;
        let mut pair_off = alloc::vec![alloc::vec![0.0; t]; t];
        for bi in &b {
            for j in 0..t {
                for k in 0..t {
                    if j != k {
                        let blk =
                            bi.view((tau.offset(j), tau.offset(k)), (tau.size(j), tau.size(k)));
                        pair_off[j][k] += blk.norm_squared();
                    }
                }
            }
        }
        let a_tilde_norm = set_norm(input.a_tilde);
        let estimated_moduli = compute_moduli(&DiagonalizedSet::from_block_diagonal(&b, tau)?)?;
        let estimated_cond =
            condition_number_from(t, smax, a_tilde_norm, estimated_moduli.omega_uniq);

        let oracle = match input.reference {
            None => None,
            Some(r) => {
                if r.a_clean.len() != input.a_tilde.len() {
                    return Err(Error::DimensionMismatch {
                        expected: input.a_tilde.len(),
                        found: r.a_clean.len(),
                    });
                }
                let moduli =
                    compute_moduli(&DiagonalizedSet::from_diagonalizer(r.a_clean, r.w, tau)?)?;
                let q = QFactors::new(r.w, input.w_tilde)?;
                let mut da = 0.0;
                for (x, y) in input.a_tilde.iter().zip(r.a_clean) {
                    da += linalg::frobenius_sq(&(x - y));
                }
                let a_norm = set_norm(r.a_clean);
                let error = alignment::align(r.w, input.w_tilde, tau)?.error;
                Some(Oracle {
                    cond_a: condition_number_from(t, q.w_norm, a_norm, moduli.omega_uniq),
                    moduli,
                    q,
                    delta_a: libm::sqrt(da),
                    a_norm,
                    error,
                })
            }
        };

        Ok(Self {
            t,
            pair_off,
            w_tilde_norm: smax,
            w_tilde_inv_norm: 1.0 / smin,
            a_tilde_norm,
            estimated_moduli,
            estimated_cond,
            oracle,
        })
    }

    /// `r` for the given weights, from cached off-block norms.
    pub fn r_tilde(&self, gamma: &GammaSpec) -> f64 {
        let gs = gamma.gammas();
        let mut acc = 0.0;
        for j in 0..self.t {
            for k in 0..self.t {
                let d = gs[k] - gs[j];
                acc += d * d * self.pair_off[j][k];
            }
        }
        libm::sqrt(acc)
    }

    pub fn report(&self, gamma: &GammaSpec) -> Result<AnalysisReport> {
        if gamma.t() != self.t {
            return Err(Error::DimensionMismatch {
                expected: self.t,
                found: gamma.t(),
            });
        }
        let g = gamma.gap();
        let r_tilde = self.r_tilde(gamma);
        let eps_berr =
            self.w_tilde_inv_norm * self.w_tilde_inv_norm * r_tilde / (g * self.a_tilde_norm);

        let em = &self.estimated_moduli;
        let eb = bound_terms(
            self.t,
            g,
            r_tilde,
            0.0,
            &QFactors::unit(self.w_tilde_norm),
            em.omega_uniq,
            em.omega_robu,
        );
        let estimated = EstimatedBound {
            omega_uniq: em.omega_uniq,
            omega_robu: em.omega_robu,
            delta: eb.delta,
            eps_star: eb.eps_star,
            ratio: eb.ratio,
            condition_holds: eb.condition_holds,
            eps_ub: eb.eps_ub,
            cond_a: self.estimated_cond,
        };

        let report = match &self.oracle {
            Some(o) => {
                let terms = bound_terms(
                    self.t,
                    g,
                    r_tilde,
                    o.delta_a,
                    &o.q,
                    o.moduli.omega_uniq,
                    o.moduli.omega_robu,
                );
                AnalysisReport {
                    gamma: gamma.gammas().to_vec(),
                    g,
                    r_tilde,
                    delta_a: Some(o.delta_a),
                    delta: terms.delta,
                    tau_const: terms.tau_const,
                    alpha_const: terms.alpha_const,
                    eps_star: terms.eps_star,
                    ratio: terms.ratio,
                    condition_holds: terms.condition_holds,
                    eps_ub: terms.eps_ub,
                    eps_berr,
                    cond_a: o.cond_a,
                    kappa_q: o.q.kappa_q,
                    q_inv_norm: o.q.q_inv_norm,
                    w_norm: Some(o.q.w_norm),
                    w_tilde_norm: self.w_tilde_norm,
                    w_tilde_inv_norm: self.w_tilde_inv_norm,
                    a_norm: o.a_norm,
                    a_tilde_norm: self.a_tilde_norm,
                    omega_uniq: o.moduli.omega_uniq,
                    omega_robu: o.moduli.omega_robu,
                    nondivisible_certified: o.moduli.nondivisible_certified,
                    error: Some(o.error),
                    estimated,
                }
            }
            None => AnalysisReport {
                gamma: gamma.gammas().to_vec(),
                g,
                r_tilde,
                delta_a: None,
                delta: eb.delta,
                tau_const: eb.tau_const,
                alpha_const: eb.alpha_const,
                eps_star: eb.eps_star,
                ratio: eb.ratio,
                condition_holds: eb.condition_holds,
                eps_ub: eb.eps_ub,
                eps_berr,
                cond_a: self.estimated_cond,
                kappa_q: 1.0,
                q_inv_norm: 1.0,
                w_norm: None,
                w_tilde_norm: self.w_tilde_norm,
                w_tilde_inv_norm: self.w_tilde_inv_norm,
                a_norm: self.a_tilde_norm,
                a_tilde_norm: self.a_tilde_norm,
                omega_uniq: em.omega_uniq,
                omega_robu: em.omega_robu,
                nondivisible_certified: em.nondivisible_certified,
                error: None,
                estimated,
            },
        };
        Ok(report)
    }
}

/// Analysis with the equally spaced default weights.
pub fn analyze(input: &AnalysisInput<'_>) -> Result<AnalysisReport> {
    Analysis::prepare(input)?.report(&default_gamma(input.tau)?)
}

/// Draws weights uniformly from `(-1, 1)` until their gap is at least [`MIN_RANDOM_GAP`].
pub fn random_gamma<R: rand::Rng + ?Sized>(rng: &mut R, t: usize) -> Result<GammaSpec> {
    if t < 2 {
        return Err(Error::TooFewBlocks);
    }
    loop {
        let gammas: Vec<f64> = (0..t)
            .map(|_| random::uniform_open(rng, -1.0, 1.0))
            .collect();
        if let Ok(spec) = GammaSpec::new(gammas) {
            if spec.gap() >= MIN_RANDOM_GAP {
                return Ok(spec);
            }
        }
    }
}

/// Picks the weights giving the smallest bound among the default and `n_random` random draws.
///
/// When the applicability condition fails for every candidate, the one with the smallest
/// ratio is returned instead. Earlier candidates win ties, the default being first.
pub fn select_gamma(
    input: &AnalysisInput<'_>,
    n_random: usize,
    seed: u64,
) -> Result<(GammaSpec, AnalysisReport)> {
    let analysis = Analysis::prepare(input)?;
    let t = input.tau.t();
    let mut rng = random::rng(seed);
    let first = default_gamma(input.tau)?;
    let first_report = analysis.report(&first)?;
    let mut best = (first, first_report);
    for _ in 0..n_random {
        let cand = random_gamma(&mut rng, t)?;
        let rep = analysis.report(&cand)?;
        let better = match (rep.eps_ub, best.1.eps_ub) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => rep.ratio < best.1.ratio,
        };
        if better {
            best = (cand, rep);
        }
    }
    Ok(best)
}
