//! Scenario grids: generate, solve, align and analyze, one row per trial.

use jbdp_core::perturbation::{AnalysisInput, AnalysisReport, Reference};
use jbdp_core::random;
use jbdp_core::{
    generate, select_gamma, solve, InstanceBundle, Partition, SolverConfig, SolverInit,
    SolverOutcome,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format;
use crate::report::{json_f64, median_row, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Grid over the number of matrices `m`.
    VaryM,
    /// Grid over `p`, with partition `p` copies of the base partition.
    VaryN,
    /// Grid over the number of blocks `t`, block sizes uniform in `1..=5`.
    VaryT,
    /// Grid over the noise level `xi`.
    VaryNoise,
    /// Repeated trials at one setting; `x` is the condition number.
    VaryCond,
    Single,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::VaryM => "vary-m",
            Scenario::VaryN => "vary-n",
            Scenario::VaryT => "vary-t",
            Scenario::VaryNoise => "vary-noise",
            Scenario::VaryCond => "vary-cond",
            Scenario::Single => "single",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::VaryM,
            Self::VaryN,
            Self::VaryT,
            Self::VaryNoise,
            Self::VaryCond,
            Self::Single,
        ]
        .into_iter()
        .find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Start the solver at the generating diagonalizer.
    Warm,
    /// Random starts drawn from the trial seed.
    Random,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::Warm => "warm",
            InitMode::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub grid: Vec<f64>,
    pub tau: Partition,
    pub m: usize,
    pub xi: f64,
    pub trials: usize,
    pub seed: u64,
    pub gamma_samples: usize,
    pub init: InitMode,
    pub solver: SolverConfig,
    pub median: bool,
}

impl ExperimentSpec {
    /// Default settings for a scenario: `tau = (3,3,3)`, `m = 16`, `xi = 1e-12`.
    pub fn new(scenario: Scenario) -> Self {
        let grid = match scenario {
            Scenario::VaryM => vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            Scenario::VaryN => (1..=7).map(f64::from).collect(),
            Scenario::VaryT => (3..=9).map(f64::from).collect(),
            Scenario::VaryNoise => (-12..=-6).map(|e| 10f64.powi(e)).collect(),
            Scenario::VaryCond | Scenario::Single => vec![0.0],
        };
        Self {
            scenario,
            grid,
            tau: Partition::new(vec![3, 3, 3]).expect("static partition"),
            m: 16,
            xi: 1e-12,
            trials: if scenario == Scenario::VaryCond {
                100
            } else {
                1
            },
            seed: 0,
            gamma_samples: 49,
            init: InitMode::Random,
            solver: SolverConfig::default(),
            median: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Invalid("grid must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Invalid("m must be at least 1".into()));
        }
        if !self.xi.is_finite() || self.xi < 0.0 {
            return Err(Error::Invalid("xi must be finite and nonnegative".into()));
        }
        let integral = matches!(
            self.scenario,
            Scenario::VaryM | Scenario::VaryN | Scenario::VaryT
        );
        for &x in &self.grid {
            if integral && (x < 1.0 || x.fract() != 0.0 || x > 1e6) {
                return Err(Error::Invalid(format!(
                    "grid value {x} must be a positive integer"
                )));
            }
            if self.scenario == Scenario::VaryT && x < 2.0 {
                return Err(Error::Invalid("vary-t needs at least 2 blocks".into()));
            }
            if self.scenario == Scenario::VaryNoise && !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "noise level {x} must be finite and nonnegative"
                )));
            }
        }
        if self.tau.t() < 2 && self.scenario != Scenario::VaryT {
            return Err(Error::Invalid(
                "the partition needs at least 2 blocks".into(),
            ));
        }
        Ok(())
    }
}

/// Stream id for the random block sizes of the vary-t scenario; far above the instance streams.
const SIZE_STREAM: u64 = 1 << 48;

/// Instance parameters of one trial.
pub fn trial_setting(
    spec: &ExperimentSpec,
    x: f64,
    trial_seed: u64,
) -> Result<(Partition, usize, f64)> {
    Ok(match spec.scenario {
        Scenario::VaryM => (spec.tau.clone(), x as usize, spec.xi),
        Scenario::VaryN => (Partition::repeated(&spec.tau, x as usize)?, spec.m, spec.xi),
        Scenario::VaryT => {
            let mut rng = random::stream(trial_seed, SIZE_STREAM);
            let sizes = (0..x as usize)
                .map(|_| 1 + (random::uniform_open(&mut rng, 0.0, 5.0) as usize).min(4))
                .collect();
            (Partition::new(sizes)?, spec.m, spec.xi)
        }
        Scenario::VaryNoise => (spec.tau.clone(), spec.m, x),
        Scenario::VaryCond | Scenario::Single => (spec.tau.clone(), spec.m, spec.xi),
    })
}

/// Solves `bundle` with the configured initialization.
pub fn solve_bundle(
    bundle: &InstanceBundle,
    init: InitMode,
    base: &SolverConfig,
    seed: u64,
) -> Result<SolverOutcome> {
    let cfg = SolverConfig {
        init: match init {
            InitMode::Warm => SolverInit::WarmStart(bundle.w_true.clone()),
            InitMode::Random => SolverInit::Random,
        },
        seed,
        ..base.clone()
    };
    Ok(solve(&bundle.a_noisy, &bundle.tau, &cfg)?)
}

/// Best-weight analysis of `w_tilde` against the bundle's exact problem.
pub fn analyze_bundle(
    bundle: &InstanceBundle,
    w_tilde: &nalgebra::DMatrix<f64>,
    gamma_samples: usize,
    seed: u64,
) -> Result<AnalysisReport> {
    let input = AnalysisInput {
        a_tilde: &bundle.a_noisy,
        w_tilde,
        tau: &bundle.tau,
        reference: Some(Reference {
            w: &bundle.w_true,
            a_clean: &bundle.a_clean,
        }),
    };
    let (_, mut rep) = select_gamma(&input, gamma_samples, seed)?;
    // the generated noise is known exactly; use it rather than the rounded difference
    if let Some(d) = rep.delta_a.as_mut() {
        *d = bundle.delta_a();
    }
    Ok(rep)
}

pub fn run_trial(spec: &ExperimentSpec, grid_idx: usize, trial: usize) -> Result<Row> {
    let x = spec.grid[grid_idx];
    let trial_seed = random::derive_seed(spec.seed, grid_idx as u32, trial as u32);
    let (tau, m, xi) = trial_setting(spec, x, trial_seed)?;
    let bundle = generate(&tau, m, xi, trial_seed)?;
    let out = solve_bundle(&bundle, spec.init, &spec.solver, trial_seed)?;
    let rep = analyze_bundle(&bundle, &out.w_tilde, spec.gamma_samples, trial_seed)?;
    Ok(Row {
        scenario: spec.scenario.name().into(),
        x: if spec.scenario == Scenario::VaryCond {
            rep.cond_a
        } else {
            x
        },
        trial: Some(trial),
        seed: Some(trial_seed),
        tau: tau.to_string(),
        n: tau.n(),
        t: tau.t(),
        m,
        xi,
        init: spec.init.name().into(),
        converged: out.converged,
        stop: out.stop.as_str().into(),
        iterations: out.iterations,
        objective: out.objective,
        omega_uniq: rep.omega_uniq,
        omega_robu: rep.omega_robu,
        delta: rep.delta,
        ratio: rep.ratio,
        eps_berr: rep.eps_berr,
        cond_a: rep.cond_a,
        eps_ub: rep.eps_ub,
        error: rep.error.unwrap_or(f64::NAN),
        g: rep.g,
        r_tilde: rep.r_tilde,
        delta_a: rep.delta_a.unwrap_or(f64::NAN),
        kappa_q: rep.kappa_q,
        condition_holds: rep.condition_holds,
        instance_sha256: format::instance_hash(&bundle)?,
    })
}

/// All rows in grid order, trials in order within a grid point. Trials run
/// in parallel; each depends only on its derived seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for g in 0..spec.grid.len() {
        let trials: Vec<Row> = (0..spec.trials)
            .into_par_iter()
            .map(|k| run_trial(spec, g, k))
            .collect::<Result<_>>()?;
        if spec.median {
            rows.extend(median_row(&trials));
        } else {
            rows.extend(trials);
        }
    }
    Ok(rows)
}

/// Outcome of analyzing one stored instance.
#[derive(Debug, Clone)]
pub struct SingleAnalysis {
    pub report: AnalysisReport,
    pub instance_sha256: String,
    pub solver: Option<SolverOutcome>,
    pub init: String,
}

impl SingleAnalysis {
    pub fn condition_holds(&self) -> bool {
        self.report.condition_holds
    }

    /// Process exit code: 0 when the bound applies, 2 when it does not.
    pub fn exit_code(&self) -> u8 {
        if self.condition_holds() {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> Value {
        let r = &self.report;
        let e = &r.estimated;
        let opt = |v: Option<f64>| v.map_or(Value::Null, json_f64);
        json!({
            "instance_sha256": self.instance_sha256,
            "init": self.init,
            "solver": self.solver.as_ref().map(|s| json!({
                "objective": json_f64(s.objective),
                "iterations": s.iterations,
                "converged": s.converged,
                "stop": s.stop.as_str(),
                "grad_norm": json_f64(s.grad_norm),
            })),
            "gamma": r.gamma.iter().map(|&g| json_f64(g)).collect::<Vec<_>>(),
            "g": json_f64(r.g),
            "r_tilde": json_f64(r.r_tilde),
            "delta_a": opt(r.delta_a),
            "delta": json_f64(r.delta),
            "tau_const": json_f64(r.tau_const),
            "alpha_const": json_f64(r.alpha_const),
            "eps_star": json_f64(r.eps_star),
            "ratio": json_f64(r.ratio),
            "condition_holds": r.condition_holds,
            "eps_ub": opt(r.eps_ub),
            "eps_berr": json_f64(r.eps_berr),
            "cond_a": json_f64(r.cond_a),
            "kappa_q": json_f64(r.kappa_q),
            "q_inv_norm": json_f64(r.q_inv_norm),
            "w_norm": opt(r.w_norm),
            "w_tilde_norm": json_f64(r.w_tilde_norm),
            "w_tilde_inv_norm": json_f64(r.w_tilde_inv_norm),
            "a_norm": json_f64(r.a_norm),
            "a_tilde_norm": json_f64(r.a_tilde_norm),
            "omega_uniq": json_f64(r.omega_uniq),
            "omega_robu": json_f64(r.omega_robu),
            "nondivisible_certified": r.nondivisible_certified,
            "error": opt(r.error),
            "estimated": {
                "omega_uniq": json_f64(e.omega_uniq),
                "omega_robu": json_f64(e.omega_robu),
                "delta": json_f64(e.delta),
                "eps_star": json_f64(e.eps_star),
                "ratio": json_f64(e.ratio),
                "condition_holds": e.condition_holds,
                "eps_ub": opt(e.eps_ub),
                "cond_a": json_f64(e.cond_a),
            },
        })
    }
}

/// Analyzes `w_tilde` (or a fresh solve when `None`) for a stored instance.
pub fn analyze_single(
    bundle: &InstanceBundle,
    w_tilde: Option<(&nalgebra::DMatrix<f64>, String)>,
    init: InitMode,
    solver: &SolverConfig,
    gamma_samples: usize,
) -> Result<SingleAnalysis> {
    let hash = format::instance_hash(bundle)?;
    let (w, outcome, init_name) = match w_tilde {
        Some((w, label)) => {
            bundle.tau.check_square(w.nrows(), w.ncols())?;
            (w.clone(), None, label)
        }
        None => {
            let out = solve_bundle(bundle, init, solver, bundle.seed)?;
            (out.w_tilde.clone(), Some(out), init.name().to_string())
        }
    };
    let report = analyze_bundle(bundle, &w, gamma_samples, bundle.seed)?;
    Ok(SingleAnalysis {
        report,
        instance_sha256: hash,
        solver: outcome,
        init: init_name,
    })
}
