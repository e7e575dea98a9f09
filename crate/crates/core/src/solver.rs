//! Approximate joint block diagonalization by nonlinear conjugate gradients.
//!
//! Minimizes `f(W) = sum_i ||offbdiag(W^T A_i W)||_F^2` over `W_tau`, which is
//! a product of Stiefel manifolds (each column group orthonormal). Gradients
//! are projected onto the tangent space, iterates are pulled back with
//! [`normalize_to_w`], and directions follow Polak-Ribiere+ with an Armijo
//! backtracking line search.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::block::{self, normalize_to_w};
use crate::error::{Error, Result};
use crate::linalg;
use crate::partition::Partition;
use crate::random;
use crate::set_norm;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const SINGULAR_DRIFT: f64 = 1e-10;
const STALL_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverInit {
    Random,
    WarmStart(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when `||grad|| <= grad_tol (1 + |f|)`.
    pub grad_tol: f64,
    /// Stop when `f <= objective_tol ||A||_F^2`.
    pub objective_tol: f64,
    /// Number of independent attempts.
    pub restarts: usize,
    pub seed: u64,
    pub init: SolverInit,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-12,
            objective_tol: 1e-32,
            restarts: 5,
            seed: 0,
            init: SolverInit::Random,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) || !(self.objective_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Why an attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// A convergence test of [`SolverConfig`] was met.
    Converged,
    /// Iterates stopped moving at working precision.
    Stalled,
    /// No step satisfied the sufficient decrease test.
    LineSearch,
    /// The next iterate came within `1e-10` of singularity; the attempt keeps the previous one.
    Singular,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stalled => "stalled",
            StopReason::LineSearch => "line-search",
            StopReason::Singular => "singular",
            StopReason::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub w_tilde: DMatrix<f64>,
    pub objective: f64,
    /// Iterations of the returned attempt.
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub grad_norm: f64,
    /// Attempt index that produced `w_tilde`.
    pub attempt: usize,
    /// Objective after each accepted iteration of the returned attempt, starting point first.
    pub trace: Vec<f64>,
}

/// `sum_i ||offbdiag(W^T A_i W)||_F^2`.
pub fn objective(w: &DMatrix<f64>, a: &[DMatrix<f64>], tau: &Partition) -> f64 {
    a.iter()
        .map(|ai| block::offbdiag_norm_sq(&(w.transpose() * ai * w), tau))
        .sum()
}

/// Objective and Euclidean gradient `2 sum_i (A_i W O_i^T + A_i^T W O_i)`, `O_i = offbdiag(W^T A_i W)`.
pub fn objective_and_gradient(
    w: &DMatrix<f64>,
    a: &[DMatrix<f64>],
    tau: &Partition,
) -> (f64, DMatrix<f64>) {
    let labels = tau.labels();
    let mut f = 0.0;
    let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
    for ai in a {
        let aw = ai * w;
        let mut o = w.transpose() * &aw;
        for c in 0..o.ncols() {
            for r in 0..o.nrows() {
                if labels[r] == labels[c] {
                    o[(r, c)] = 0.0;
                } else {
                    f += o[(r, c)] * o[(r, c)];
                }
            }
        }
        grad += &aw * o.transpose() + ai.transpose() * w * &o;
    }
    (f, grad * 2.0)
}

/// Projection onto the tangent space of `W_tau` at `w`: `G_j - W_j sym(W_j^T G_j)`.
fn project(w: &DMatrix<f64>, v: &DMatrix<f64>, tau: &Partition) -> DMatrix<f64> {
    let mut out = v.clone();
    for j in 0..tau.t() {
        let (o, s) = (tau.offset(j), tau.size(j));
        let wj = w.columns(o, s);
        let m = wj.transpose() * v.columns(o, s);
        let sym = (&m + m.transpose()) * 0.5;
        let corr = wj * sym;
        let mut cols = out.columns_mut(o, s);
        cols -= corr;
    }
    out
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Change of the objective along the unretracted ray `x + alpha d`, a quartic in `alpha`.
struct RayModel {
    c: [f64; 4],
}

impl RayModel {
    fn new(x: &DMatrix<f64>, d: &DMatrix<f64>, a: &[DMatrix<f64>], tau: &Partition) -> Self {
        let labels = tau.labels();
        let mut c = [0.0; 4];
        for ai in a {
            let ax = ai * x;
            let ad = ai * d;
            let p0 = x.transpose() * &ax;
            let p1 = x.transpose() * &ad + d.transpose() * &ax;
            let p2 = d.transpose() * &ad;
            for col in 0..p0.ncols() {
                for row in 0..p0.nrows() {
                    if labels[row] == labels[col] {
                        continue;
                    }
                    let (o, b1, b2) = (p0[(row, col)], p1[(row, col)], p2[(row, col)]);
                    c[0] += 2.0 * o * b1;
                    c[1] += b1 * b1 + 2.0 * o * b2;
                    c[2] += 2.0 * b1 * b2;
                    c[3] += b2 * b2;
                }
            }
        }
        Self { c }
    }

    fn slope(&self) -> f64 {
        self.c[0]
    }

    fn change(&self, alpha: f64) -> f64 {
        let [c1, c2, c3, c4] = self.c;
        alpha * (c1 + alpha * (c2 + alpha * (c3 + alpha * c4)))
    }

    fn derivative(&self, alpha: f64) -> f64 {
        let [c1, c2, c3, c4] = self.c;
        c1 + alpha * (2.0 * c2 + alpha * (3.0 * c3 + alpha * 4.0 * c4))
    }

    /// First stationary point past zero, found by bracketing and bisection.
    fn minimizer(&self, guess: f64) -> Option<f64> {
        if !(self.slope() < 0.0) {
            return None;
        }
        let mut hi = guess.max(f64::MIN_POSITIVE);
        let mut grow = 0;
        while self.derivative(hi) < 0.0 {
            hi *= 2.0;
            grow += 1;
            if grow > 200 || !hi.is_finite() {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.derivative(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

struct Attempt {
    w: DMatrix<f64>,
    f: f64,
    grad_norm: f64,
    iterations: usize,
    stop: StopReason,
    trace: Vec<f64>,
}

fn run_attempt(
    start: DMatrix<f64>,
    a: &[DMatrix<f64>],
    tau: &Partition,
    cfg: &SolverConfig,
    f_target: f64,
) -> Result<Attempt> {
    let mut x = normalize_to_w(&start, tau)?;
    let (mut f, eg) = objective_and_gradient(&x, a, tau);
    let mut g = project(&x, &eg, tau);
    let mut d = -&g;
    let mut step = 0.0;
    let dim = tau.n() * tau.n();
    let mut since_restart = 0;
    let mut stalled = 0;
    let mut trace = Vec::new();
    trace.push(f);
    let stop = |f: f64, gn: f64| gn <= cfg.grad_tol * (1.0 + f.abs()) || f <= f_target;
    let mut reason = StopReason::MaxIterations;

    for it in 0..cfg.max_iters {
        let gn = g.norm();
        if stop(f, gn) {
            return Ok(Attempt {
                w: x,
                f,
                grad_norm: gn,
                iterations: it,
                stop: StopReason::Converged,
                trace,
            });
        }

        let mut model = RayModel::new(&x, &d, a, tau);
        if !(model.slope() < 0.0) {
            d = -&g;
            model = RayModel::new(&x, &d, a, tau);
        }
        let slope = model.slope();
        let guess = if step > 0.0 { step } else { 0.1 / d.norm() };
        let Some(mut alpha) = model.minimizer(guess) else {
            reason = StopReason::LineSearch;
            break;
        };
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            if model.change(alpha) <= ARMIJO_C * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            reason = StopReason::LineSearch;
            break;
        }
        step = alpha;
        let x_new = match normalize_to_w(&(&x + &d * alpha), tau) {
            Ok(w) if linalg::extreme_singular_values(&w)?.0 >= SINGULAR_DRIFT => w,
            Ok(_) | Err(Error::Singular { .. }) => {
                reason = StopReason::Singular;
                break;
            }
            Err(e) => return Err(e),
        };

        let moved = (&x_new - &x).norm();
        stalled = if moved <= 4.0 * linalg::UNIT_ROUNDOFF * x.norm() {
            stalled + 1
        } else {
            0
        };

        let (f_new, eg_new) = objective_and_gradient(&x_new, a, tau);
        let g_new = project(&x_new, &eg_new, tau);
        let g_old = project(&x_new, &g, tau);
        let d_old = project(&x_new, &d, tau);
        since_restart += 1;
        let beta = if since_restart >= dim {
            since_restart = 0;
            0.0
        } else {
            (inner(&g_new, &(&g_new - &g_old)) / (gn * gn)).max(0.0)
        };
        d = -&g_new + d_old * beta;
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        if stalled >= STALL_STEPS {
            reason = StopReason::Stalled;
            break;
        }
    }
    let gn = g.norm();
    if stop(f, gn) {
        reason = StopReason::Converged;
    }
    let iterations = trace.len() - 1;
    Ok(Attempt {
        w: x,
        f,
        grad_norm: gn,
        iterations,
        stop: reason,
        trace,
    })
}

/// Best-of-restarts local minimizer of [`objective`] in `W_tau`.
pub fn solve(a: &[DMatrix<f64>], tau: &Partition, cfg: &SolverConfig) -> Result<SolverOutcome> {
    cfg.validate()?;
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    for ai in a {
        tau.check_square(ai.nrows(), ai.ncols())?;
    }
    if let SolverInit::WarmStart(w0) = &cfg.init {
        tau.check_square(w0.nrows(), w0.ncols())?;
    }
    let a_norm = set_norm(a);
    let f_target = cfg.objective_tol * a_norm * a_norm;

    let mut best: Option<(usize, Attempt)> = None;
    let mut last_err = None;
    for attempt in 0..cfg.restarts {
        let start = match (&cfg.init, attempt) {
            (SolverInit::WarmStart(w0), 0) => w0.clone(),
            _ => random::member_w(&mut random::stream(cfg.seed, attempt as u64), tau),
        };
        let res = match run_attempt(start, a, tau, cfg, f_target) {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let done = res.stop == StopReason::Converged
            && (res.f <= f_target || matches!(cfg.init, SolverInit::WarmStart(_)));
        let better = best.as_ref().is_none_or(|(_, b)| res.f < b.f);
        if better {
            best = Some((attempt, res));
        }
        if done {
            break;
        }
    }
    let (attempt, res) = best.ok_or(last_err.unwrap_or(Error::NoConvergence))?;
    Ok(SolverOutcome {
        objective: objective(&res.w, a, tau),
        w_tilde: res.w,
        iterations: res.iterations,
        converged: res.stop == StopReason::Converged,
        stop: res.stop,
        grad_norm: res.grad_norm,
        attempt,
        trace: res.trace,
    })
}

/// Central finite-difference gradient, for checking [`objective_and_gradient`].
pub fn finite_difference_gradient(
    w: &DMatrix<f64>,
    a: &[DMatrix<f64>],
    tau: &Partition,
    h: f64,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(w.nrows(), w.ncols());
    let mut probe = w.clone();
    for idx in 0..w.len() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let fp = objective(&probe, a, tau);
        probe[idx] = orig - h;
        let fm = objective(&probe, a, tau);
        probe[idx] = orig;
        out[idx] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Contribution of each `A_i` to [`objective`].
pub fn per_matrix_objective(w: &DMatrix<f64>, a: &[DMatrix<f64>], tau: &Partition) -> Vec<f64> {
    a.iter()
        .map(|ai| block::offbdiag_norm_sq(&(w.transpose() * ai * w), tau))
        .collect()
}
