//! Synthetic data-generating processes for simulations.
//!
//! Covariates are i.i.d. from a product density on the unit cube, and
//! responses are `Y = mu(X) + sigma(X) * eps` with standard Gaussian
//! `eps`. All draws are inverse-CDF transforms of one substream per
//! replicate (per observation: the `d` coordinates, then the noise
//! uniform), so datasets are bit-identical across platforms and thread
//! counts.

use mondrian_rf::rng::{unit_open, RngStream};
use mondrian_rf::variance::normal_quantile;
use mondrian_rf::TrainingSet;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::{HarnessError, Result};

/// Regression functions available to experiment configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuKind {
    /// `mu(x) = 1`.
    Constant,
    /// `mu(x) = sum_j x_j`.
    Linear,
    /// `mu(x) = sum_j x_j^2`.
    Quadratic,
    /// `mu(x) = sum_j (x_j - 1/2)^4`.
    Quartic,
    /// `mu(x) = prod_j sin(pi x_j)`.
    SinPiProd,
}

impl MuKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "quartic" => Ok(Self::Quartic),
            "sin_pi_prod" => Ok(Self::SinPiProd),
            _ => Err(HarnessError::UnknownName { kind: "mu", name: name.to_string() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
            Self::Quartic => "quartic",
            Self::SinPiProd => "sin_pi_prod",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Linear => x.iter().sum(),
            Self::Quadratic => x.iter().map(|v| v * v).sum(),
            Self::Quartic => x.iter().map(|v| (v - 0.5).powi(4)).sum(),
            Self::SinPiProd => {
                x.iter().map(|v| (core::f64::consts::PI * v).sin()).product()
            }
        }
    }
}

/// Covariate densities. Beta shapes are restricted to (0, 1] so the
/// product density stays bounded away from zero on the cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityKind {
    Uniform,
    ProductBeta { alpha: f64, beta: f64 },
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::ProductBeta { .. } => "product_beta",
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::ProductBeta { alpha, beta } = self {
            for v in [alpha, beta] {
                if !(*v > 0.0 && *v <= 1.0) {
                    return Err(HarnessError::Invalid(format!(
                        "product_beta shapes must lie in (0, 1] to keep the density \
                         bounded away from zero; got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample_coord(&self, u: f64) -> f64 {
        match self {
            Self::Uniform => u,
            Self::ProductBeta { alpha, beta } => Beta::new(*alpha, *beta)
                .expect("shapes validated at construction")
                .inverse_cdf(u)
                .clamp(0.0, 1.0),
        }
    }
}

/// Noise scale functions `sigma(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Constant(f64),
    /// `sigma(x) = base + slope * mean_j(x_j)`, heteroscedastic but
    /// bounded below by `base`.
    Linear { base: f64, slope: f64 },
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant(_) => "constant",
            Self::Linear { .. } => "linear",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant(s) => *s,
            Self::Linear { base, slope } => {
                base + slope * x.iter().sum::<f64>() / x.len() as f64
            }
        }
    }

    fn min_sigma(&self) -> f64 {
        match self {
            Self::Constant(s) => *s,
            Self::Linear { base, .. } => *base,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(s) if *s == 0.0)
    }
}

/// A complete data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct Dgp {
    pub dim: usize,
    pub mu: MuKind,
    pub density: DensityKind,
    pub noise: NoiseKind,
    pub n: usize,
    /// Noiseless data is only meaningful for bias experiments and must be
    /// requested explicitly.
    pub allow_zero_noise: bool,
}

impl Dgp {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HarnessError::Invalid("dgp dimension must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(HarnessError::Invalid("dgp sample size must be at least 1".into()));
        }
        self.density.validate()?;
        let min_sigma = self.noise.min_sigma();
        if min_sigma < 0.0 || (min_sigma == 0.0 && !self.allow_zero_noise) {
            return Err(HarnessError::Invalid(
                "noise scale must be positive (set allow_zero_noise for bias experiments)"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Draws the training set for one replicate.
    pub fn generate(&self, stream: &RngStream, replicate: u64) -> Result<TrainingSet> {
        self.validate()?;
        let mut rng = stream.data(replicate);
        let mut xs = Vec::with_capacity(self.n * self.dim);
        let mut ys = Vec::with_capacity(self.n);
        let mut point = vec![0.0; self.dim];
        for _ in 0..self.n {
            for slot in point.iter_mut() {
                *slot = self.density.sample_coord(unit_open(&mut rng));
            }
            let u = unit_open(&mut rng);
            let sigma = self.noise.eval(&point);
            let eps = if sigma == 0.0 {
                0.0
            } else {
                sigma * normal_quantile(u).expect("u is interior")
            };
            xs.extend_from_slice(&point);
            ys.push(self.mu.eval(&point) + eps);
        }
        Ok(TrainingSet::new(xs, ys, self.dim)?)
    }
}
