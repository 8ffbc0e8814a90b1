//! Closed-form evaluation of the estimator's asymptotic quantities, so
//! Monte Carlo experiments can be checked against theory.
//!
//! Everything here consumes derivative *values* supplied by the caller;
//! nothing is differentiated numerically.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::debias::DebiasConfig;
use crate::error::Error;
use crate::fmath;
use crate::rng::exponential;
use crate::Result;

/// Local description of the data-generating process at a query point:
/// the covariate density, its gradient, the regression gradient and pure
/// second derivatives, and the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    dim: usize,
    density: f64,
    density_grad: Vec<f64>,
    mu_grad: Vec<f64>,
    mu_second: Vec<f64>,
    sigma2: f64,
}

impl LocalModel {
    pub fn new(
        density: f64,
        density_grad: Vec<f64>,
        mu_grad: Vec<f64>,
        mu_second: Vec<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let dim = density_grad.len();
        if dim == 0 || mu_grad.len() != dim || mu_second.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                got: mu_grad.len().max(mu_second.len()),
            });
        }
        if !(density > 0.0) {
            return Err(Error::NonPositiveScale { index: 0, value: density });
        }
        if !(sigma2 > 0.0) {
            return Err(Error::NonPositiveScale { index: 0, value: sigma2 });
        }
        Ok(Self { dim, density, density_grad, mu_grad, mu_second, sigma2 })
    }

    /// Uniform covariates with noise variance `sigma2`: density one,
    /// all supplied derivatives of `mu` pure second order.
    pub fn uniform(mu_grad: Vec<f64>, mu_second: Vec<f64>, sigma2: f64) -> Result<Self> {
        let d = mu_grad.len();
        Self::new(1.0, alloc::vec![0.0; d], mu_grad, mu_second, sigma2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The pairwise overlap constant
/// `ell(a, a') = (2a/3) (1 - (a/a') ln(a'/a + 1))` entering the limiting
/// variance of the debiased estimator. Homogeneous of degree one:
/// `ell(ca, ca') = c ell(a, a')`.
pub fn overlap(a_r: f64, a_rp: f64) -> f64 {
    (2.0 * a_r / 3.0) * (1.0 - (a_r / a_rp) * fmath::ln(a_rp / a_r + 1.0))
}

/// Sum over scale pairs `sum_{r,r'} omega_r omega_{r'}
/// (ell_{rr'} + ell_{r'r})^d`; the dimensionless part of the limiting
/// variance, also the denominator constant of the AIMSE-optimal lifetime.
pub fn overlap_sum(config: &DebiasConfig, dim: usize) -> f64 {
    let scales = config.scales();
    let omega = config.omega();
    let mut total = 0.0;
    for (&ar, &wr) in scales.iter().zip(omega) {
        for (&arp, &wrp) in scales.iter().zip(omega) {
            let pair = overlap(ar, arp) + overlap(arp, ar);
            total += wr * wrp * fmath::powi(pair, dim as i32);
        }
    }
    total
}

/// Limiting variance `Sigma_d(x)` of the normalized debiased estimator:
/// `(sigma2 / f) sum_{r,r'} omega_r omega_{r'} (ell_{rr'} + ell_{r'r})^d`.
/// With no debiasing this reduces to
/// `(sigma2 / f) ((4 - 4 ln 2) / 3)^d`.
pub fn limiting_variance(config: &DebiasConfig, model: &LocalModel) -> f64 {
    model.sigma2 / model.density * overlap_sum(config, model.dim)
}

/// Leading bias `B_1(x) / lambda^2` of the plain forest estimator:
/// `(1 / 2 lambda^2) [ sum_j d2_j mu + (1/f) sum_j d_j mu d_j f ]`.
pub fn leading_bias_quadratic(model: &LocalModel, lifetime: f64) -> f64 {
    let curvature: f64 = model.mu_second.iter().sum();
    let drift: f64 =
        model.mu_grad.iter().zip(&model.density_grad).map(|(m, f)| m * f).sum();
    (curvature + drift / model.density) / (2.0 * lifetime * lifetime)
}

/// Even mixed derivatives of the regression function at a point, keyed by
/// multi-index `nu` (entry `nu` holds the value of `d^{2 nu} mu`).
#[derive(Debug, Clone, Default)]
pub struct EvenDerivatives {
    entries: BTreeMap<Vec<usize>, f64>,
}

impl EvenDerivatives {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, nu: &[usize], value: f64) -> &mut Self {
        self.entries.insert(nu.to_vec(), value);
        self
    }

    fn get(&self, nu: &[usize]) -> Result<f64> {
        self.entries.get(nu).copied().ok_or_else(|| Error::MissingDerivative(nu.to_vec()))
    }
}

/// All multi-indices of dimension `dim` with total weight `weight`.
pub fn multi_indices(dim: usize, weight: usize) -> Vec<Vec<usize>> {
    fn fill(dim: usize, weight: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            prefix.push(weight);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for head in (0..=weight).rev() {
            prefix.push(head);
            fill(dim - 1, weight - head, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(dim, weight, &mut Vec::new(), &mut out);
    out
}

/// Order-`r` bias term `B_r(x) / lambda^{2r}` for uniformly distributed
/// covariates: `lambda^{-2r} sum_{|nu|=r} d^{2 nu} mu(x) prod_j
/// 1/(nu_j + 1)`. Errors if the tensor lacks a required entry.
pub fn bias_uniform(
    tensor: &EvenDerivatives,
    dim: usize,
    r: usize,
    lifetime: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for nu in multi_indices(dim, r) {
        let weight: f64 = nu.iter().map(|&k| 1.0 / (k as f64 + 1.0)).product();
        total += tensor.get(&nu)? * weight;
    }
    Ok(total / fmath::powi(lifetime, 2 * r as i32))
}

/// Samples the side lengths of the Mondrian cell at an interior point
/// directly from the closed-form law `|T(x)_j| = (E_1/lambda ^ x_j) +
/// (E_2/lambda ^ (1 - x_j))` with independent unit exponentials, without
/// growing a tree. This is the distributional oracle the tree sampler is
/// tested against.
pub fn cell_shape_sampler(x: &[f64], lifetime: f64, rng: &mut impl RngCore) -> Result<Vec<f64>> {
    if !(lifetime > 0.0) || !lifetime.is_finite() {
        return Err(Error::InvalidLifetime(lifetime));
    }
    for (j, &xi) in x.iter().enumerate() {
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::PointOutOfDomain { dim: j, value: xi });
        }
    }
    Ok(x.iter()
        .map(|&xi| {
            let down = (exponential(rng, 1.0) / lifetime).min(xi);
            let up = (exponential(rng, 1.0) / lifetime).min(1.0 - xi);
            down + up
        })
        .collect())
}
