//! `mondrian-rf`: fit, predict, and do inference with debiased Mondrian
//! random forests from the command line.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mondrian_rf::debias::DebiasConfig;
use mondrian_rf::tuning::{
    lambda_aimse, select_forest_size, tune_for_inference, tune_lambda, CvMethod, TuneMethod,
    TuneReport,
};
use mondrian_rf::variance::confidence_interval;
use mondrian_rf::{RngStream, TrainingSet};
use mondrian_rf_cli::config::{self, Reader};
use mondrian_rf_cli::{io, parallel, ExperimentSpec};

/// Environment variable supplying the default worker thread count.
const THREADS_ENV: &str = "MONDRIAN_RF_THREADS";

#[derive(Parser)]
#[command(
    name = "mondrian-rf",
    version,
    about = "Mondrian random forest regression with debiasing and pointwise inference",
    after_help = "Exit codes: 0 success, 1 runtime error, 2 usage error."
)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: $MONDRIAN_RF_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat `key = value` file supplying defaults for omitted options
    /// (keys: seed, threads, lambda, b, j, gamma, alpha).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a (debiased) forest and report its structure as JSON.
    Fit(ModelArgs),
    /// Evaluate the estimator at query points.
    Predict(PredictArgs),
    /// Point estimate, variance estimates, and confidence interval.
    Ci(CiArgs),
    /// Select the lifetime from data (AIMSE plug-in or cross-validation).
    Tune(TuneArgs),
    /// Run a Monte Carlo experiment described by a spec file.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Training data CSV with header x1,...,xd,y.
    #[arg(long)]
    data: PathBuf,

    /// Base lifetime.
    #[arg(long)]
    lambda: Option<f64>,

    /// Trees per debiasing level (default: the rate-optimal rule).
    #[arg(long = "B")]
    trees: Option<usize>,

    /// Debiasing order (default 0: no debiasing).
    #[arg(long = "J")]
    order: Option<usize>,

    /// Ladder factor: scales a_r = (1+gamma)^r, or 1+gamma*r with
    /// --arithmetic.
    #[arg(long)]
    gamma: Option<f64>,

    /// Use the arithmetic scale ladder instead of the geometric one.
    #[arg(long)]
    arithmetic: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Query point as comma-separated coordinates; repeatable.
    #[arg(long = "x")]
    points: Vec<String>,

    /// CSV of query points with header x1,...,xd.
    #[arg(long)]
    points_file: Option<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Query point as comma-separated coordinates.
    #[arg(long = "x")]
    point: String,

    /// Miscoverage level of the two-sided interval.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct TuneArgs {
    /// Training data CSV with header x1,...,xd,y.
    #[arg(long)]
    data: PathBuf,

    /// aimse | aimse-robust | loocv | gcv
    #[arg(long)]
    method: String,

    /// Debiasing order the lifetime is intended for.
    #[arg(long = "J")]
    order: Option<usize>,

    /// Trees per level for the cross-validation fits.
    #[arg(long = "B")]
    trees: Option<usize>,

    /// Lambda grid for loocv/gcv as comma-separated values
    /// (default: 20 geometric points on [n^(1/(d+8)), n^(1/d)]).
    #[arg(long)]
    grid: Option<String>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    arithmetic: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment spec file (flat key = value; see README).
    #[arg(long)]
    spec: PathBuf,

    /// Override the spec's CSV output path.
    #[arg(long)]
    out_csv: Option<PathBuf>,

    /// Override the spec's JSON output path.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

/// A post-parse usage error; mapped to exit code 2 like clap's own.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Option resolution: command line, then config file, then defaults.
struct Settings {
    file: config::Config,
}

impl Settings {
    fn load(path: Option<&PathBuf>) -> anyhow::Result<Self> {
        let file = match path {
            Some(p) => config::load(p)?,
            None => config::Config::new(),
        };
        Ok(Self { file })
    }

    fn f64(&self, cli: Option<f64>, key: &str) -> anyhow::Result<Option<f64>> {
        if cli.is_some() {
            return Ok(cli);
        }
        Ok(Reader::new(&self.file).f64(key)?)
    }

    fn usize(&self, cli: Option<usize>, key: &str) -> anyhow::Result<Option<usize>> {
        if cli.is_some() {
            return Ok(cli);
        }
        Ok(Reader::new(&self.file).usize(key)?)
    }
}

fn init_threads(cli_threads: Option<usize>, settings: &Settings) -> anyhow::Result<()> {
    let threads = match settings.usize(cli_threads, "threads")? {
        Some(t) => Some(t),
        None => std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()),
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // Errors only if a global pool already exists; that pool wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn parse_point(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--x: '{tok}' is not a number")))
        })
        .collect()
}

struct ResolvedModel {
    training: Arc<TrainingSet>,
    lambda: f64,
    trees: usize,
    config: DebiasConfig,
}

fn resolve_model(args: &ModelArgs, settings: &Settings) -> anyhow::Result<ResolvedModel> {
    let training = Arc::new(io::read_training_csv(&args.data)?);
    let order = settings.usize(args.order, "j")?.unwrap_or(0);
    let gamma = settings.f64(args.gamma, "gamma")?.unwrap_or(0.05);
    let config = if args.arithmetic {
        DebiasConfig::arithmetic(order, gamma)?
    } else {
        DebiasConfig::geometric(order, gamma)?
    };
    let lambda = settings
        .f64(args.lambda, "lambda")?
        .ok_or_else(|| usage("--lambda is required (or set 'lambda' in --config)"))?;
    let trees = settings
        .usize(args.trees, "b")?
        .unwrap_or_else(|| select_forest_size(training.len(), order));
    Ok(ResolvedModel { training, lambda, trees, config })
}

#[derive(Serialize)]
struct LevelSummary {
    lifetime: f64,
    scale: f64,
    omega: f64,
    total_leaves: usize,
    mean_leaves_per_tree: f64,
}

#[derive(Serialize)]
struct FitSummary {
    n: usize,
    d: usize,
    lambda: f64,
    #[serde(rename = "B")]
    trees: usize,
    #[serde(rename = "J")]
    order: usize,
    seed: u64,
    levels: Vec<LevelSummary>,
}

#[derive(Serialize)]
struct PredictionRow {
    x: Vec<f64>,
    estimate: f64,
}

#[derive(Serialize)]
struct CiSummary {
    estimate: f64,
    sigma2_hat: f64,
    limiting_variance_hat: f64,
    ci_lower: f64,
    ci_upper: f64,
    alpha: f64,
    lambda: f64,
    #[serde(rename = "B")]
    trees: usize,
    #[serde(rename = "J")]
    order: usize,
}

#[derive(Serialize)]
struct TuneSummary {
    lambda_hat: f64,
    method: String,
    #[serde(rename = "J")]
    order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivative_rms: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<(f64, f64)>>,
}

impl From<TuneReport> for TuneSummary {
    fn from(report: TuneReport) -> Self {
        Self {
            lambda_hat: report.lambda_hat,
            method: match report.method {
                TuneMethod::AimsePlugin => "aimse".into(),
                TuneMethod::AimseRobust => "aimse_robust".into(),
                TuneMethod::Loocv => "loocv".into(),
                TuneMethod::Gcv => "gcv".into(),
            },
            order: report.order,
            derivative_rms: report.derivative_rms,
            residual_sigma2: report.residual_sigma2,
            curve: report.curve,
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value).context("serializing output")?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::load(cli.config.as_ref())?;
    init_threads(cli.threads, &settings)?;
    let seed = settings
        .usize(cli.seed.map(|s| s as usize), "seed")?
        .map(|s| s as u64)
        .unwrap_or(1);
    let stream = RngStream::new(seed);

    match cli.command {
        Command::Fit(args) => {
            let model = resolve_model(&args, &settings)?;
            let df = parallel::fit_debiased(
                model.training,
                model.lambda,
                model.trees,
                model.config,
                &stream,
                0,
            )?;
            let levels = df
                .levels()
                .iter()
                .zip(df.config().scales().iter().zip(df.config().omega()))
                .map(|(forest, (&scale, &omega))| {
                    let total: usize = forest.trees().iter().map(|t| t.leaf_count()).sum();
                    LevelSummary {
                        lifetime: forest.lifetime(),
                        scale,
                        omega,
                        total_leaves: total,
                        mean_leaves_per_tree: total as f64 / forest.size() as f64,
                    }
                })
                .collect();
            print_json(&FitSummary {
                n: df.training().len(),
                d: df.training().dim(),
                lambda: df.base_lifetime(),
                trees: df.size(),
                order: df.config().order(),
                seed,
                levels,
            })
        }
        Command::Predict(args) => {
            let model = resolve_model(&args.model, &settings)?;
            let mut queries: Vec<Vec<f64>> = args
                .points
                .iter()
                .map(|p| parse_point(p))
                .collect::<anyhow::Result<_>>()?;
            if let Some(path) = &args.points_file {
                queries.extend(io::read_points_csv(path)?);
            }
            if queries.is_empty() {
                return Err(usage("predict needs --x or --points-file"));
            }
            let df = parallel::fit_debiased(
                model.training,
                model.lambda,
                model.trees,
                model.config,
                &stream,
                0,
            )?;
            let predictions = queries
                .into_iter()
                .map(|x| {
                    let estimate = df.predict(&x)?;
                    Ok(PredictionRow { x, estimate })
                })
                .collect::<mondrian_rf::Result<Vec<_>>>()?;
            print_json(&serde_json::json!({ "predictions": predictions }))
        }
        Command::Ci(args) => {
            let model = resolve_model(&args.model, &settings)?;
            let x = parse_point(&args.point)?;
            let alpha = settings.f64(args.alpha, "alpha")?.unwrap_or(0.05);
            let df = parallel::fit_debiased(
                model.training,
                model.lambda,
                model.trees,
                model.config,
                &stream,
                0,
            )?;
            let result = confidence_interval(&df, &x, alpha)?;
            print_json(&CiSummary {
                estimate: result.estimate,
                sigma2_hat: result.sigma2_hat,
                limiting_variance_hat: result.limiting_variance_hat,
                ci_lower: result.ci_lower,
                ci_upper: result.ci_upper,
                alpha: result.alpha,
                lambda: result.lambda,
                trees: result.trees,
                order: result.order,
            })
        }
        Command::Tune(args) => {
            let training = Arc::new(io::read_training_csv(&args.data)?);
            let order = settings.usize(args.order, "j")?.unwrap_or(0);
            let gamma = settings.f64(args.gamma, "gamma")?.unwrap_or(0.05);
            let config = if args.arithmetic {
                DebiasConfig::arithmetic(order, gamma)?
            } else {
                DebiasConfig::geometric(order, gamma)?
            };
            let report = match args.method.as_str() {
                "aimse" => lambda_aimse(&training, &config)?,
                "aimse-robust" => tune_for_inference(&training, &config)?,
                "loocv" | "gcv" => {
                    let trees = settings
                        .usize(args.trees, "b")?
                        .unwrap_or_else(|| select_forest_size(training.len(), order));
                    let grid = args
                        .grid
                        .as_deref()
                        .map(parse_point)
                        .transpose()?;
                    let method = if args.method == "loocv" { CvMethod::Loocv } else { CvMethod::Gcv };
                    tune_lambda(training.clone(), method, &config, trees, grid.as_deref(), &stream)?
                }
                other => {
                    return Err(usage(format!(
                        "--method must be aimse, aimse-robust, loocv or gcv, got '{other}'"
                    )))
                }
            };
            print_json(&TuneSummary::from(report))
        }
        Command::Simulate(args) => {
            let cfg = config::load(&args.spec)?;
            let mut spec = ExperimentSpec::from_config(&cfg)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(path) = args.out_csv {
                spec.out_csv = Some(path);
            }
            if let Some(path) = args.out_json {
                spec.out_json = Some(path);
            }
            let summary = spec.run()?;
            print_json(&summary)
        }
    }
}
