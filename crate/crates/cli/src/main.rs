use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use volfunc::config::{load_experiment, parse_plan, Ini};
use volfunc::csvio;
use volfunc::estimators::{estimate, EstimateOptions, EstimateReport, EstimatorKind};
use volfunc::mc::{self, ExperimentSpec};
use volfunc::simkit::{rng_stream, simulate_with_rng, SimOptions};
use volfunc::spotvol::{
    truncation_exponent_lower_bound, Truncation, TruncationScale, TuningPlan, DEFAULT_TRUNC_CONST,
    DEFAULT_TRUNC_EXPONENT,
};
use volfunc::testfn::{parse_function, FunctionRef};
use volfunc::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Estimate integrated functionals of volatility from high-frequency data.
#[derive(Debug, Parser)]
#[command(name = "volfunc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path; writes `path.csv` and the `path.truth` sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate a functional on an observation CSV and print the report.
    Estimate {
        /// CSV with columns time,X1,…,Xd.
        input: PathBuf,
        #[arg(long, default_value = "power:p=2")]
        function: String,
        #[arg(long, default_value = "corrected_overlapping")]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
        /// Skip the border correction of the overlapping estimator.
        #[arg(long)]
        no_border_correction: bool,
        /// Print a CSV header and row instead of key=value lines.
        #[arg(long)]
        csv: bool,
        /// Read the [plan] section of this file before applying flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        plan: PlanFlags,
    },
    /// Run a Monte Carlo replication study.
    Mc {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Variance ratio of the corrected estimator to the moment baseline.
    Compare {
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Debug, Args)]
struct RunFlags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated estimator kinds, overriding the config.
    #[arg(long)]
    estimator: Option<String>,
    /// Semicolon-separated function specs, overriding the config.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    ci_level: Option<f64>,
    #[command(flatten)]
    plan: PlanFlags,
}

#[derive(Debug, Args, Default)]
struct PlanFlags {
    /// Window exponent γ in k = ⌈κ n^γ⌉.
    #[arg(long)]
    gamma: Option<f64>,
    /// Window constant κ.
    #[arg(long)]
    kappa: Option<f64>,
    /// Truncation exponent ϖ in u = α ŝ Δ^ϖ.
    #[arg(long)]
    varpi: Option<f64>,
    /// Truncation constant α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Theta-mode window k = ⌈θ/√Δ⌉.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    no_truncation: bool,
}

impl PlanFlags {
    fn apply(&self, mut plan: TuningPlan) -> TuningPlan {
        if let Some(g) = self.gamma {
            plan.window_exponent = g;
        }
        if let Some(k) = self.kappa {
            plan.window_const = k;
        }
        if let Some(t) = self.theta {
            plan.theta = Some(t);
        }
        if self.varpi.is_some() || self.alpha.is_some() {
            let (exponent, constant, scale) = match plan.truncation {
                Truncation::Level {
                    exponent,
                    constant,
                    scale,
                } => (exponent, constant, scale),
                Truncation::None => (DEFAULT_TRUNC_EXPONENT, DEFAULT_TRUNC_CONST, TruncationScale::Bipower),
            };
            plan.truncation = Truncation::Level {
                exponent: self.varpi.unwrap_or(exponent),
                constant: self.alpha.unwrap_or(constant),
                scale,
            };
        }
        if self.no_truncation {
            plan.truncation = Truncation::None;
        }
        plan
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config { .. } | Error::Input(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Dimension(_) => EXIT_DATA,
        _ => EXIT_NUMERICAL,
    }
}

/// Warns when ϖ sits below the range where truncation removes the jump bias.
fn warn_on_varpi(plan: &TuningPlan, functions: &[FunctionRef]) {
    let Truncation::Level { exponent, .. } = plan.truncation else {
        return;
    };
    for g in functions {
        let bound = truncation_exponent_lower_bound(g.growth_order(), 0.0);
        if exponent < bound {
            tracing::warn!(
                "truncation exponent {exponent} is below {bound:.4}, the lower end of the admissible range for {}",
                g.name()
            );
        }
    }
}

fn run_simulate(config: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> volfunc::Result<()> {
    let exp = load_experiment(config)?;
    let seed = seed.unwrap_or(exp.seed);
    let dir = out_dir.or(exp.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let functions = exp
        .functions
        .iter()
        .map(|f| parse_function(f, exp.model.dim))
        .collect::<volfunc::Result<Vec<_>>>()?;
    let mut rng = rng_stream(seed, 0);
    let path = simulate_with_rng(&exp.model, &mut rng, seed, &functions, SimOptions::default())?;
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("path.csv");
    let side = csvio::write_simulated(&csv_path, &exp.model, &path)?;
    println!("{}", csv_path.display());
    println!("{}", side.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_estimate(
    input: &Path,
    function: &str,
    kind: EstimatorKind,
    ci_level: f64,
    border_correction: bool,
    csv: bool,
    config: Option<&Path>,
    flags: &PlanFlags,
) -> volfunc::Result<()> {
    let base = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config {
                line: 0,
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            parse_plan(&Ini::parse(&text)?)?
        }
        None => TuningPlan::default(),
    };
    let plan = flags.apply(base);
    plan.validate()?;
    let grid = csvio::read_grid(input)?;
    let g = parse_function(function, grid.dim())?;
    warn_on_varpi(&plan, std::slice::from_ref(&g));
    let options = EstimateOptions {
        kind,
        ci_level,
        border_correction,
    };
    let report = estimate(&g, &grid, &plan, &options)?;
    if csv {
        println!("{}", EstimateReport::csv_header());
        println!("{}", report.to_csv_row());
    } else {
        print!("{}", report.to_key_value());
    }
    Ok(())
}

fn load_run(run: &RunFlags) -> volfunc::Result<ExperimentSpec> {
    let mut spec = load_experiment(&run.config)?;
    if let Some(s) = run.seed {
        spec.seed = s;
    }
    if let Some(w) = run.workers {
        spec.workers = Some(w);
    }
    if let Some(d) = &run.out_dir {
        spec.out_dir = Some(d.clone());
    }
    if let Some(e) = &run.estimator {
        spec.estimators = e
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<EstimatorKind>, _>>()
            .map_err(|e| Error::Input(format!("--estimator: {e}")))?;
    }
    if let Some(f) = &run.function {
        spec.functions = f.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(c) = run.ci_level {
        spec.ci_level = c;
    }
    spec.plan = run.plan.apply(spec.plan);
    spec.validate()?;
    let functions = spec
        .functions
        .iter()
        .map(|f| parse_function(f, spec.model.dim))
        .collect::<volfunc::Result<Vec<_>>>()?;
    warn_on_varpi(&spec.plan, &functions);
    Ok(spec)
}

fn out_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn run_mc(run: &RunFlags) -> volfunc::Result<()> {
    let spec = load_run(run)?;
    let result = mc::run_experiment(&spec)?;
    let paths = mc::write_outputs(&result, &out_dir(&spec))?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    print!("{}", mc::summary_csv(&result.summary));
    Ok(())
}

fn run_compare(run: &RunFlags) -> volfunc::Result<()> {
    let spec = load_run(run)?;
    let (result, rows) = mc::compare(&spec)?;
    let dir = out_dir(&spec);
    let mut paths = mc::write_outputs(&result, &dir)?;
    let ratio_path = dir.join("variance_ratio.csv");
    fs::write(&ratio_path, mc::ratio_csv(&rows))?;
    paths.push(ratio_path);
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    print!("{}", mc::ratio_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, seed, out_dir } => run_simulate(config, *seed, out_dir.clone()),
        Command::Estimate {
            input,
            function,
            estimator,
            ci_level,
            no_border_correction,
            csv,
            config,
            plan,
        } => run_estimate(
            input,
            function,
            *estimator,
            *ci_level,
            !no_border_correction,
            *csv,
            config.as_deref(),
            plan,
        ),
        Command::Mc { run } => run_mc(run),
        Command::Compare { run } => run_compare(run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
