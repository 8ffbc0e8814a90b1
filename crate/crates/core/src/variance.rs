//! Variance estimation and feasible confidence intervals.
//!
//! The normalized estimator `sqrt(n / lambda^d) (muhat_d(x) - mu(x))` is
//! asymptotically Gaussian with limiting variance `Sigma_d(x)`. The
//! estimator here plugs the local residual variance `sigma2_hat(x)` into
//! the squared norm of the debiased smoother weights, giving the interval
//! `muhat_d(x) +- q_{1-alpha/2} sqrt(lambda^d / n) sqrt(Sigmahat_d(x))`.

use crate::cell::check_point;
use crate::debias::DebiasedForest;
use crate::error::Error;
use crate::fmath;
use crate::Result;

/// A point estimate with its variance estimates and confidence interval,
/// together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Debiased point estimate.
    pub estimate: f64,
    /// Local residual variance estimate (base level).
    pub sigma2_hat: f64,
    /// Estimate of the limiting variance of the normalized estimator.
    pub limiting_variance_hat: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Trees per debiasing level.
    pub trees: usize,
    /// Debiasing order.
    pub order: usize,
}

/// Local residual variance at `x`: the average over base-level trees of
/// the mean squared deviation of cell responses from the base-level
/// estimate, empty cells contributing zero.
pub fn sigma2_hat(df: &DebiasedForest, x: &[f64]) -> Result<f64> {
    let base = &df.levels()[0];
    let training = base.training();
    check_point(x, training.dim())?;
    let center = base.predict(x)?;
    let d = training.dim();
    let mut total = 0.0;
    for tree in base.trees() {
        let cell = tree.cell_containing(x)?;
        let mut count = 0usize;
        let mut sq = 0.0;
        for (row, &y) in training.covariates().chunks_exact(d).zip(training.responses()) {
            if cell.contains(row) {
                count += 1;
                let r = y - center;
                sq += r * r;
            }
        }
        if count > 0 {
            total += sq / count as f64;
        }
    }
    Ok((total / base.size() as f64).max(0.0))
}

/// Estimate of the limiting variance `Sigma_d(x)`: `sigma2_hat(x)`
/// times `n / lambda^d` times the squared l2 norm of the debiased
/// smoother weights, with `lambda` the base lifetime.
pub fn limiting_variance_hat(df: &DebiasedForest, x: &[f64]) -> Result<f64> {
    let training = df.training();
    check_point(x, training.dim())?;
    let n = training.len();
    let mut combined = alloc::vec![0.0; n];
    for (forest, &w) in df.levels().iter().zip(df.config().omega()) {
        let level_weights = forest.weights(x)?;
        for (c, lw) in combined.iter_mut().zip(level_weights) {
            *c += w * lw;
        }
    }
    let norm2: f64 = combined.iter().map(|w| w * w).sum();
    let scale = n as f64 / fmath::powi(df.base_lifetime(), training.dim() as i32);
    Ok((sigma2_hat(df, x)? * scale * norm2).max(0.0))
}

/// Two-sided confidence interval for the regression function at `x`.
///
/// Warns when `x` is within one expected cell width `1/lambda` of the
/// boundary, where the interval is not backed by the theory.
pub fn confidence_interval(df: &DebiasedForest, x: &[f64], alpha: f64) -> Result<InferenceResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let training = df.training();
    check_point(x, training.dim())?;
    let lambda = df.base_lifetime();
    let edge = x.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min);
    if edge < 1.0 / lambda {
        log::warn!(
            "query point is within 1/lambda = {:.3e} of the boundary; \
             the interval is only supported at interior points",
            1.0 / lambda
        );
    }

    let estimate = df.predict(x)?;
    let s2 = sigma2_hat(df, x)?;
    let sigma_d = limiting_variance_hat(df, x)?;
    let q = normal_quantile(1.0 - alpha / 2.0)?;
    let n = training.len() as f64;
    let half = q * fmath::sqrt(fmath::powi(lambda, training.dim() as i32) / n)
        * fmath::sqrt(sigma_d);
    Ok(InferenceResult {
        estimate,
        sigma2_hat: s2,
        limiting_variance_hat: sigma_d,
        ci_lower: estimate - half,
        ci_upper: estimate + half,
        alpha,
        lambda,
        trees: df.size(),
        order: df.config().order(),
    })
}

const SQRT_2PI: f64 = 2.506628274631000502415765284811;
const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Standard normal distribution function, via the complementary error
/// function for accuracy in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * fmath::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    fmath::exp(-0.5 * z * z) / SQRT_2PI
}

// Acklam's rational approximation to the inverse normal CDF
// (|relative error| < 1.15e-9), refined below by one Newton step.
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

fn acklam(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = fmath::sqrt(-2.0 * fmath::ln(p));
        let num = ((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5];
        let den = (((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0;
        num / den
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        let num = ((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5];
        let den = ((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
            + ACKLAM_B[4])
            * r
            + 1.0;
        q * num / den
    } else {
        -acklam(1.0 - p)
    }
}

/// Inverse standard normal CDF, accurate to well below 1e-8: Acklam's
/// rational approximation followed by one Newton refinement against the
/// erfc-based CDF (evaluated on the nearer tail for stability).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let mut z = acklam(p);
    let pdf = normal_pdf(z);
    if pdf > 1e-280 {
        if p <= 0.5 {
            z -= (normal_cdf(z) - p) / pdf;
        } else {
            // Upper-tail residual avoids cancellation in 1 - CDF.
            let survival = 0.5 * fmath::erfc(z * FRAC_1_SQRT_2);
            z += (survival - (1.0 - p)) / pdf;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debias::DebiasConfig;
    use crate::forest::{Forest, TrainingSet};
    use crate::process::MondrianTree;
    use crate::rng::{unit_open, RngStream};
    use alloc::sync::Arc;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn quantile_reference_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.995).unwrap() - 2.5758293035489004).abs() < 1e-9);
        assert!((normal_quantile(0.025).unwrap() + 1.959963984540054).abs() < 1e-9);
        assert!(matches!(normal_quantile(0.0), Err(Error::InvalidProbability(_))));
        assert!(matches!(normal_quantile(1.0), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn quantile_round_trips_through_cdf() {
        for k in 1..200 {
            let p = k as f64 / 200.0;
            let z = normal_quantile(p).unwrap();
            assert!((normal_cdf(z) - p).abs() < 1e-12, "p = {p}");
        }
        // Tails.
        for &p in &[1e-6, 1e-10, 1.0 - 1e-6] {
            let z = normal_quantile(p).unwrap();
            assert!((normal_cdf(z) - p).abs() < 1e-9 * p.max(1e-3), "p = {p}");
        }
    }

    fn constant_df(c: f64) -> DebiasedForest {
        let xs = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let training = Arc::new(TrainingSet::new(xs, vec![c; 5], 1).unwrap());
        DebiasedForest::fit(training, 1.5, 4, DebiasConfig::identity(), &RngStream::new(2), 0)
            .unwrap()
    }

    #[test]
    fn constant_responses_have_zero_variance() {
        let df = constant_df(2.5);
        assert_eq!(sigma2_hat(&df, &[0.5]).unwrap(), 0.0);
        let r = confidence_interval(&df, &[0.5], 0.05).unwrap();
        assert_eq!(r.ci_lower, r.estimate);
        assert_eq!(r.ci_upper, r.estimate);
    }

    #[test]
    fn hand_computed_two_point_cell() {
        // Single trivial tree: cell holds Y = {0, 2}, estimate 1,
        // sigma2_hat = ((0-1)^2 + (2-1)^2) / 2 = 1.
        let training = Arc::new(TrainingSet::new(vec![0.4, 0.6], vec![0.0, 2.0], 1).unwrap());
        let tree = MondrianTree::sample(0.0, 1, &mut RngStream::new(1).tree(0, 0, 0)).unwrap();
        let forest = Forest::from_trees(training, vec![tree]).unwrap();
        let df = DebiasedForest::from_levels(vec![forest], DebiasConfig::identity(), 1.0).unwrap();
        assert_eq!(df.predict(&[0.5]).unwrap(), 1.0);
        assert_eq!(sigma2_hat(&df, &[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn empty_cells_give_zero_everything() {
        let training = Arc::new(TrainingSet::new(vec![0.95], vec![42.0], 1).unwrap());
        let stream = RngStream::new(5);
        for b in 0.. {
            let tree = MondrianTree::sample(8.0, 1, &mut stream.tree(0, 0, b)).unwrap();
            if !tree.cell_containing(&[0.05]).unwrap().contains(&[0.95]) {
                let forest = Forest::from_trees(training, vec![tree]).unwrap();
                let df =
                    DebiasedForest::from_levels(vec![forest], DebiasConfig::identity(), 8.0)
                        .unwrap();
                assert_eq!(limiting_variance_hat(&df, &[0.05]).unwrap(), 0.0);
                return;
            }
        }
    }

    fn noisy_df(scale: f64, shift: f64) -> DebiasedForest {
        let stream = RngStream::new(77);
        let mut data = stream.data(0);
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|_| unit_open(&mut data)).collect();
        let ys: Vec<f64> =
            (0..n).map(|_| scale * (unit_open(&mut data) - 0.5) + shift).collect();
        let training = Arc::new(TrainingSet::new(xs, ys, 1).unwrap());
        DebiasedForest::fit(
            training,
            6.0,
            8,
            DebiasConfig::new(vec![1.0, 1.05]).unwrap(),
            &stream,
            0,
        )
        .unwrap()
    }

    #[test]
    fn scale_equivariance_is_exact_for_power_of_two() {
        let base = noisy_df(1.0, 0.0);
        let doubled = noisy_df(2.0, 0.0);
        let x = [0.5];
        let a = confidence_interval(&base, &x, 0.05).unwrap();
        let b = confidence_interval(&doubled, &x, 0.05).unwrap();
        assert_eq!(b.estimate, 2.0 * a.estimate);
        assert_eq!(b.sigma2_hat, 4.0 * a.sigma2_hat);
        assert_eq!(b.limiting_variance_hat, 4.0 * a.limiting_variance_hat);
        assert_eq!(b.ci_lower, 2.0 * a.ci_lower);
        assert_eq!(b.ci_upper, 2.0 * a.ci_upper);
    }

    #[test]
    fn shift_equivariance_within_rounding() {
        let base = noisy_df(1.0, 0.0);
        let shifted = noisy_df(1.0, 10.0);
        let x = [0.5];
        let a = confidence_interval(&base, &x, 0.05).unwrap();
        let b = confidence_interval(&shifted, &x, 0.05).unwrap();
        assert!((b.estimate - a.estimate - 10.0).abs() < 1e-10);
        assert!((b.sigma2_hat - a.sigma2_hat).abs() < 1e-9);
        assert!((b.ci_lower - a.ci_lower - 10.0).abs() < 1e-9);
    }

    #[test]
    fn smaller_alpha_widens_the_interval() {
        let df = noisy_df(1.0, 0.0);
        let x = [0.5];
        let wide = confidence_interval(&df, &x, 0.01).unwrap();
        let narrow = confidence_interval(&df, &x, 0.10).unwrap();
        assert!(wide.ci_upper - wide.ci_lower > narrow.ci_upper - narrow.ci_lower);
        assert!(matches!(confidence_interval(&df, &x, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(confidence_interval(&df, &x, 1.0), Err(Error::InvalidAlpha(_))));
    }
}
