use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jbdp::format::{self, DiagonalizerFile};
use jbdp::report;
use jbdp::{parse_list, parse_tau, Error, ExperimentSpec, InitMode, Result, Scenario};
use jbdp_core::{generate, SolverConfig};

#[derive(Parser)]
#[command(
    name = "jbdp",
    version,
    about = "Perturbation analysis for joint block diagonalization"
)]
struct Cli {
    /// Directory for outputs when --out is not given.
    #[arg(long, global = true, env = "JBDP_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance with a known diagonalizer.
    Generate {
        #[arg(long, default_value = "3,3,3")]
        tau: String,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 1e-12)]
        xi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute an approximate diagonalizer of a stored instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a diagonalizer of a stored instance; exit 0 when the bound applies, 2 when not.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
        /// Diagonalizer file; omitted or with --solve, the instance is solved first.
        #[arg(long, conflicts_with = "solve")]
        w: Option<PathBuf>,
        #[arg(long)]
        solve: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 49)]
        gamma_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario grid and emit one row per trial.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Start from the generating diagonalizer instead of random points.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long)]
    solver_seed: Option<u64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed: self.solver_seed.unwrap_or(0),
            ..SolverConfig::default()
        }
    }

    fn init(&self) -> InitMode {
        if self.warm_start {
            InitMode::Warm
        } else {
            InitMode::Random
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    VaryM,
    VaryN,
    VaryT,
    VaryNoise,
    VaryCond,
    Single,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    scenario: ScenarioArg,
    /// Comma-separated grid values; defaults depend on the scenario.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value = "3,3,3")]
    tau: String,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 1e-12)]
    xi: f64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 49)]
    gamma_samples: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Emit the median over trials per grid point instead of every trial.
    #[arg(long)]
    median: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write plot data (x, error, eps_ub, eps_berr) to this file.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn scenario(s: ScenarioArg) -> Scenario {
    match s {
        ScenarioArg::VaryM => Scenario::VaryM,
        ScenarioArg::VaryN => Scenario::VaryN,
        ScenarioArg::VaryT => Scenario::VaryT,
        ScenarioArg::VaryNoise => Scenario::VaryNoise,
        ScenarioArg::VaryCond => Scenario::VaryCond,
        ScenarioArg::Single => Scenario::Single,
    }
}

/// `--out`, else `<out_dir>/<default_name>`, else stdout.
fn destination(
    out: &Option<PathBuf>,
    out_dir: &Option<PathBuf>,
    default_name: &str,
) -> Option<PathBuf> {
    out.clone()
        .or_else(|| out_dir.as_ref().map(|d| d.join(default_name)))
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.into(),
                    source: e,
                })?;
            }
            Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Result<()> {
    let mut w = open_output(path)?;
    let label = path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::Io {
            path: label,
            source: e,
        })
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate {
            tau,
            m,
            xi,
            seed,
            out,
        } => {
            let tau = parse_tau(&tau)?;
            let b = generate(&tau, m, xi, seed)?;
            let dest = destination(&out, &cli.out_dir, &format!("instance_{seed}.json"));
            write_text(&dest, &format::instance_to_string(&b)?)?;
            Ok(0)
        }
        Command::Solve {
            instance,
            solver,
            out,
        } => {
            let b = format::load_instance(&instance)?;
            let init = solver.init();
            let cfg = solver.config();
            let seed = solver.solver_seed.unwrap_or(b.seed);
            let res = jbdp::experiment::solve_bundle(&b, init, &cfg, seed)?;
            let d = DiagonalizerFile {
                tau: b.tau.clone(),
                w: res.w_tilde,
                init: init.name().into(),
                objective: res.objective,
                converged: res.converged,
            };
            let dest = destination(&out, &cli.out_dir, &format!("{}_w.json", stem(&instance)));
            write_text(&dest, &format::diagonalizer_to_string(&d)?)?;
            if !res.converged {
                eprintln!(
                    "warning: solver stopped before convergence ({})",
                    res.stop.as_str()
                );
            }
            Ok(0)
        }
        Command::Analyze {
            instance,
            w,
            solve: _,
            solver,
            gamma_samples,
            out,
        } => {
            let b = format::load_instance(&instance)?;
            let w_file = w.as_deref().map(format::load_diagonalizer).transpose()?;
            if let Some(d) = &w_file {
                if d.tau != b.tau {
                    return Err(Error::Invalid(format!(
                        "diagonalizer partition {} does not match instance partition {}",
                        d.tau, b.tau
                    )));
                }
            }
            let mut cfg = solver.config();
            cfg.seed = solver.solver_seed.unwrap_or(b.seed);
            let res = jbdp::analyze_single(
                &b,
                w_file.as_ref().map(|d| (&d.w, d.init.clone())),
                solver.init(),
                &cfg,
                gamma_samples,
            )?;
            let dest = destination(
                &out,
                &cli.out_dir,
                &format!("{}_report.json", stem(&instance)),
            );
            write_text(&dest, &serde_json::to_string_pretty(&res.to_json())?)?;
            Ok(res.exit_code())
        }
        Command::Experiment(args) => {
            let sc = scenario(args.scenario);
            let mut spec = ExperimentSpec::new(sc);
            if let Some(g) = &args.grid {
                spec.grid = parse_list::<f64>(g)?;
            }
            spec.tau = parse_tau(&args.tau)?;
            spec.m = args.m;
            spec.xi = args.xi;
            if let Some(t) = args.trials {
                spec.trials = t;
            }
            spec.seed = args.seed;
            spec.gamma_samples = args.gamma_samples;
            spec.init = args.solver.init();
            spec.solver = args.solver.config();
            spec.median = args.median;
            let rows = jbdp::run_experiment(&spec)?;
            let ext = if args.format == OutputFormat::Csv {
                "csv"
            } else {
                "jsonl"
            };
            let dest = destination(&args.out, &cli.out_dir, &format!("{}.{ext}", sc.name()));
            let w = open_output(&dest)?;
            match args.format {
                OutputFormat::Csv => report::write_csv(w, &rows)?,
                OutputFormat::Jsonl => report::write_jsonl(w, &rows)?,
            }
            let plot = args.plot.clone().or_else(|| {
                args.out
                    .is_none()
                    .then_some(())
                    .and(cli.out_dir.as_ref())
                    .map(|d| d.join(format!("{}_plot.csv", sc.name())))
            });
            if let Some(p) = plot {
                report::write_plot(open_output(&Some(p))?, &rows)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
