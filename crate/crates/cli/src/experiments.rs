//! Monte Carlo experiments: confidence-interval coverage and bias decay.
//!
//! Replications run in parallel; replicate `r` owns the data substream
//! `data(r)` and the tree substreams `(r, level, b)`, and results are
//! collected in replicate order before any aggregation, so outputs are
//! byte-identical at any thread count.

use std::path::PathBuf;
use std::sync::Arc;

use mondrian_rf::debias::{DebiasConfig, DebiasedForest};
use mondrian_rf::rng::RngStream;
use mondrian_rf::tuning::{lambda_aimse, select_forest_size, tune_for_inference};
use mondrian_rf::variance::confidence_interval;
use mondrian_rf::TrainingSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, Reader};
use crate::dgp::{DensityKind, Dgp, MuKind, NoiseKind};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Coverage,
    BiasDecay,
}

/// How the base lifetime is chosen in each replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// `n^exponent`, optionally rounded up to an integer.
    Power { exponent: f64, round_up: bool },
    /// AIMSE plug-in at the estimation order.
    AimsePlugin,
    /// Robust bias correction: plug-in at order J-1, estimation at J.
    AimseRobust,
}

impl LambdaRule {
    fn describe(&self) -> String {
        match self {
            Self::Fixed(v) => format!("fixed({v})"),
            Self::Power { exponent, round_up } => {
                if *round_up {
                    format!("ceil(n^{exponent})")
                } else {
                    format!("n^{exponent}")
                }
            }
            Self::AimsePlugin => "aimse_plugin".into(),
            Self::AimseRobust => "aimse_robust".into(),
        }
    }

    fn resolve(&self, training: &TrainingSet, config: &DebiasConfig) -> Result<f64> {
        Ok(match self {
            Self::Fixed(v) => *v,
            Self::Power { exponent, round_up } => {
                let raw = (training.len() as f64).powf(*exponent);
                if *round_up {
                    raw.ceil()
                } else {
                    raw
                }
            }
            Self::AimsePlugin => lambda_aimse(training, config)?.lambda_hat,
            Self::AimseRobust => tune_for_inference(training, config)?.lambda_hat,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRule {
    Fixed(usize),
    /// `select_forest_size(n, J)`.
    RateOptimal,
}

impl SizeRule {
    fn describe(&self) -> String {
        match self {
            Self::Fixed(b) => format!("fixed({b})"),
            Self::RateOptimal => "rate_optimal".into(),
        }
    }

    fn resolve(&self, n: usize, order: usize) -> usize {
        match self {
            Self::Fixed(b) => *b,
            Self::RateOptimal => select_forest_size(n, order),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Geometric,
    Arithmetic,
}

/// A complete experiment description, buildable from a flat config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub dgp: Dgp,
    /// Query points, all interior for coverage runs.
    pub queries: Vec<Vec<f64>>,
    pub lambda: LambdaRule,
    /// Lifetime grid for bias-decay runs.
    pub lambda_grid: Vec<f64>,
    pub size: SizeRule,
    pub order: usize,
    pub ladder: LadderKind,
    pub gamma: f64,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn debias_config(&self) -> Result<DebiasConfig> {
        Ok(match self.ladder {
            LadderKind::Geometric => DebiasConfig::geometric(self.order, self.gamma)?,
            LadderKind::Arithmetic => DebiasConfig::arithmetic(self.order, self.gamma)?,
        })
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let r = Reader::new(cfg);
        let kind = match r.require("kind")? {
            "coverage" => ExperimentKind::Coverage,
            "bias_decay" => ExperimentKind::BiasDecay,
            other => {
                return Err(HarnessError::Config(format!(
                    "kind must be 'coverage' or 'bias_decay', got '{other}'"
                )))
            }
        };

        let dim = r.usize("d")?.unwrap_or(1);
        let n = r.usize("n")?.ok_or_else(|| HarnessError::Config("missing key 'n'".into()))?;
        let mu = MuKind::from_name(r.raw("mu").unwrap_or("sin_pi_prod"))?;
        let density = match r.raw("f").unwrap_or("uniform") {
            "uniform" => DensityKind::Uniform,
            "product_beta" => DensityKind::ProductBeta {
                alpha: r.f64("f_alpha")?.unwrap_or(1.0),
                beta: r.f64("f_beta")?.unwrap_or(1.0),
            },
            other => {
                return Err(HarnessError::UnknownName { kind: "f", name: other.to_string() })
            }
        };
        let sigma = r.f64("sigma")?.unwrap_or(1.0);
        let noise = match r.raw("noise").unwrap_or("constant") {
            "constant" => NoiseKind::Constant(sigma),
            "linear" => NoiseKind::Linear {
                base: sigma,
                slope: r.f64("noise_slope")?.unwrap_or(0.0),
            },
            other => {
                return Err(HarnessError::UnknownName { kind: "noise", name: other.to_string() })
            }
        };
        let allow_zero_noise = r.bool("allow_zero_noise")?.unwrap_or(false);
        let dgp = Dgp { dim, mu, density, noise, n, allow_zero_noise };

        let coords = r
            .f64_list("x")?
            .ok_or_else(|| HarnessError::Config("missing key 'x' (query points)".into()))?;
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(HarnessError::Config(format!(
                "'x' must list d = {dim} coordinates per query point, got {} values",
                coords.len()
            )));
        }
        let queries: Vec<Vec<f64>> = coords.chunks(dim).map(|c| c.to_vec()).collect();

        let lambda = if let Some(v) = r.f64("lambda")? {
            LambdaRule::Fixed(v)
        } else {
            match r.raw("lambda_rule") {
                None | Some("aimse_robust") => LambdaRule::AimseRobust,
                Some("aimse") => LambdaRule::AimsePlugin,
                Some("power") => LambdaRule::Power {
                    exponent: r.f64("lambda_exponent")?.ok_or_else(|| {
                        HarnessError::Config("lambda_rule = power needs 'lambda_exponent'".into())
                    })?,
                    round_up: r.bool("lambda_round_up")?.unwrap_or(false),
                },
                Some(other) => {
                    return Err(HarnessError::Config(format!(
                        "lambda_rule must be 'power', 'aimse' or 'aimse_robust', got '{other}'"
                    )))
                }
            }
        };
        let lambda_grid = r.f64_list("lambda_grid")?.unwrap_or_default();

        let size = if let Some(b) = r.usize("b")? {
            SizeRule::Fixed(b)
        } else {
            SizeRule::RateOptimal
        };

        let order = r.usize("j")?.unwrap_or(0);
        let ladder = match r.raw("ladder").unwrap_or("geometric") {
            "geometric" => LadderKind::Geometric,
            "arithmetic" => LadderKind::Arithmetic,
            other => {
                return Err(HarnessError::UnknownName { kind: "ladder", name: other.to_string() })
            }
        };

        Ok(Self {
            kind,
            dgp,
            queries,
            lambda,
            lambda_grid,
            size,
            order,
            ladder,
            gamma: r.f64("gamma")?.unwrap_or(0.05),
            alpha: r.f64("alpha")?.unwrap_or(0.05),
            replications: r.usize("reps")?.unwrap_or(100),
            seed: r.usize("seed")?.unwrap_or(1) as u64,
            out_csv: r.raw("out_csv").map(PathBuf::from),
            out_json: r.raw("out_json").map(PathBuf::from),
        })
    }

    /// Runs the experiment and writes any configured outputs.
    pub fn run(&self) -> Result<Summary> {
        let summary = match self.kind {
            ExperimentKind::Coverage => Summary::Coverage(run_coverage(self)?),
            ExperimentKind::BiasDecay => Summary::BiasDecay(run_bias_decay(self)?),
        };
        if let Some(path) = &self.out_csv {
            match &summary {
                Summary::Coverage(s) => crate::io::write_coverage_csv(path, s)?,
                Summary::BiasDecay(s) => crate::io::write_bias_csv(path, s)?,
            }
        }
        if let Some(path) = &self.out_json {
            match &summary {
                Summary::Coverage(s) => crate::io::write_json(path, s)?,
                Summary::BiasDecay(s) => crate::io::write_json(path, s)?,
            }
        }
        Ok(summary)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Summary {
    Coverage(CoverageSummary),
    BiasDecay(BiasDecaySummary),
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    pub experiment: String,
    pub n: usize,
    pub dim: usize,
    pub replications: usize,
    pub alpha: f64,
    pub order: usize,
    pub seed: u64,
    pub mu: String,
    pub density: String,
    pub noise: String,
    pub lambda_rule: String,
    pub size_rule: String,
    pub trees: usize,
    pub points: Vec<CoveragePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveragePoint {
    pub x: Vec<f64>,
    pub mu: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    pub mean_estimate: f64,
    pub rmse: f64,
    pub mean_lambda: f64,
}

/// Coverage study: in each replication, draw data, resolve the lifetime
/// and forest size, fit, and record the interval at each query point.
pub fn run_coverage(spec: &ExperimentSpec) -> Result<CoverageSummary> {
    spec.dgp.validate()?;
    if spec.queries.is_empty() {
        return Err(HarnessError::Invalid("coverage needs at least one query point".into()));
    }
    for q in &spec.queries {
        if q.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(HarnessError::Invalid(format!(
                "coverage query points must be interior to the unit cube, got {q:?}"
            )));
        }
    }
    if spec.replications == 0 {
        return Err(HarnessError::Invalid("replications must be at least 1".into()));
    }
    let config = spec.debias_config()?;
    let stream = RngStream::new(spec.seed);
    let trees = spec.size.resolve(spec.dgp.n, spec.order);

    struct Rep {
        lambda: f64,
        per_query: Vec<(f64, f64, f64)>, // estimate, lower, upper
    }

    let reps: Vec<Rep> = (0..spec.replications)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let training = Arc::new(spec.dgp.generate(&stream, r as u64)?);
            let lambda = spec.lambda.resolve(&training, &config)?;
            let df = DebiasedForest::fit(
                training,
                lambda,
                trees,
                config.clone(),
                &stream,
                r as u64,
            )?;
            let per_query = spec
                .queries
                .iter()
                .map(|q| {
                    confidence_interval(&df, q, spec.alpha)
                        .map(|ci| (ci.estimate, ci.ci_lower, ci.ci_upper))
                })
                .collect::<mondrian_rf::Result<Vec<_>>>()?;
            Ok(Rep { lambda, per_query })
        })
        .collect::<Result<Vec<_>>>()?;

    let r = spec.replications as f64;
    let mean_lambda = reps.iter().map(|rep| rep.lambda).sum::<f64>() / r;
    let points = spec
        .queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let truth = spec.dgp.mu.eval(q);
            let mut covered = 0usize;
            let mut width = 0.0;
            let mut mean_est = 0.0;
            let mut mse = 0.0;
            for rep in &reps {
                let (est, lo, hi) = rep.per_query[qi];
                if lo <= truth && truth <= hi {
                    covered += 1;
                }
                width += hi - lo;
                mean_est += est;
                mse += (est - truth) * (est - truth);
            }
            CoveragePoint {
                x: q.clone(),
                mu: truth,
                coverage: covered as f64 / r,
                mean_ci_width: width / r,
                mean_estimate: mean_est / r,
                rmse: (mse / r).sqrt(),
                mean_lambda,
            }
        })
        .collect();

    Ok(CoverageSummary {
        experiment: "coverage".into(),
        n: spec.dgp.n,
        dim: spec.dgp.dim,
        replications: spec.replications,
        alpha: spec.alpha,
        order: spec.order,
        seed: spec.seed,
        mu: spec.dgp.mu.name().into(),
        density: spec.dgp.density.name().into(),
        noise: spec.dgp.noise.name().into(),
        lambda_rule: spec.lambda.describe(),
        size_rule: spec.size.describe(),
        trees,
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasDecaySummary {
    pub experiment: String,
    pub n: usize,
    pub dim: usize,
    pub replications: usize,
    pub order: usize,
    pub seed: u64,
    pub mu: String,
    pub queries: Vec<BiasQuery>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasQuery {
    pub x: Vec<f64>,
    /// Fitted log-log slope of |bias| against lambda; absent when fewer
    /// than two usable grid points remain.
    pub slope: Option<f64>,
    pub points: Vec<BiasPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasPoint {
    pub lambda: f64,
    pub bias: f64,
}

/// Least-squares slope of `ln |bias|` on `ln lambda`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> =
        points.iter().filter(|(_, b)| *b != 0.0).map(|&(l, b)| (l.ln(), b.abs().ln())).collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in usable {
        num += (t - mean_t) * (y - mean_y);
        den += (t - mean_t) * (t - mean_t);
    }
    (den > 0.0).then(|| num / den)
}

/// Noiseless bias measurement: for each grid lifetime, average the
/// estimator over replications (fresh covariates and trees each time,
/// shared across lifetimes as common random numbers) and subtract the
/// truth. Grid points whose measured bias is exactly zero are excluded
/// from the slope with a warning.
pub fn run_bias_decay(spec: &ExperimentSpec) -> Result<BiasDecaySummary> {
    spec.dgp.validate()?;
    if !(spec.dgp.noise.is_zero() && spec.dgp.allow_zero_noise) {
        return Err(HarnessError::Invalid(
            "bias decay requires sigma = 0 with allow_zero_noise = true".into(),
        ));
    }
    if spec.lambda_grid.len() < 3 {
        return Err(HarnessError::Invalid("bias decay needs a lambda grid of >= 3 points".into()));
    }
    if spec.queries.is_empty() {
        return Err(HarnessError::Invalid("bias decay needs at least one query point".into()));
    }
    let config = spec.debias_config()?;
    let stream = RngStream::new(spec.seed);
    let trees = spec.size.resolve(spec.dgp.n, spec.order);

    // mean_estimates[g][q]
    let mut mean_estimates = vec![vec![0.0; spec.queries.len()]; spec.lambda_grid.len()];
    for (g, &lambda) in spec.lambda_grid.iter().enumerate() {
        let sums: Vec<Vec<f64>> = (0..spec.replications)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>> {
                let training = Arc::new(spec.dgp.generate(&stream, r as u64)?);
                let df = DebiasedForest::fit(
                    training,
                    lambda,
                    trees,
                    config.clone(),
                    &stream,
                    r as u64,
                )?;
                spec.queries
                    .iter()
                    .map(|q| Ok(df.predict(q)?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for rep in sums {
            for (acc, est) in mean_estimates[g].iter_mut().zip(rep) {
                *acc += est;
            }
        }
        for acc in mean_estimates[g].iter_mut() {
            *acc /= spec.replications as f64;
        }
    }

    let queries = spec
        .queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let truth = spec.dgp.mu.eval(q);
            let points: Vec<BiasPoint> = spec
                .lambda_grid
                .iter()
                .enumerate()
                .map(|(g, &lambda)| BiasPoint { lambda, bias: mean_estimates[g][qi] - truth })
                .collect();
            for p in &points {
                if p.bias == 0.0 {
                    log::warn!(
                        "bias at lambda = {} is numerically zero; excluded from the slope",
                        p.lambda
                    );
                }
            }
            let slope = loglog_slope(
                &points.iter().map(|p| (p.lambda, p.bias)).collect::<Vec<_>>(),
            );
            BiasQuery { x: q.clone(), slope, points }
        })
        .collect();

    Ok(BiasDecaySummary {
        experiment: "bias_decay".into(),
        n: spec.dgp.n,
        dim: spec.dgp.dim,
        replications: spec.replications,
        order: spec.order,
        seed: spec.seed,
        mu: spec.dgp.mu.name().into(),
        queries,
    })
}
