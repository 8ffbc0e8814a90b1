//! Generalized-jackknife debiasing.
//!
//! The base estimator's conditional bias expands in even powers of the
//! inverse lifetime: `sum_s B_s(x) / lambda^{2s}`. Fitting extra forests
//! at lifetimes `a_r * lambda` and combining them with coefficients
//! `omega_r` chosen so that `sum_r omega_r = 1` and
//! `sum_r omega_r a_r^{-2s} = 0` for `s = 1..J` annihilates the first `J`
//! bias terms, at the price of a larger limiting variance.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::Error;
use crate::fmath;
use crate::forest::{Forest, TrainingSet};
use crate::linalg::solve_square;
use crate::rng::RngStream;
use crate::Result;

/// Largest supported debiasing order. Beyond this the Vandermonde system
/// with nearby scales (for example `a_r = 1.05^r`) is numerically fragile,
/// and orders above two are rarely advisable anyway.
pub const MAX_ORDER: usize = 5;

const RESIDUAL_WARN: f64 = 1e-8;

/// Debiasing coefficients for one scale ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasConfig {
    scales: Vec<f64>,
    omega: Vec<f64>,
    omega_bar: f64,
}

impl DebiasConfig {
    /// Solves the `(J+1) x (J+1)` Vandermonde system `sum_r omega_r
    /// a_r^{-2s} = e_0[s]` for the given scales `a_0 = 1 < a_1 < ...`
    /// (any distinct positive values with `a_0 = 1` are accepted).
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales[0] != 1.0 {
            return Err(Error::BaseScaleNotOne(scales.first().copied().unwrap_or(f64::NAN)));
        }
        let order = scales.len() - 1;
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge { order, max: MAX_ORDER });
        }
        for (i, &a) in scales.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::NonPositiveScale { index: i, value: a });
            }
            for (j, &b) in scales.iter().enumerate().take(i) {
                if a == b {
                    return Err(Error::DuplicateScale { first: j, second: i, value: a });
                }
            }
        }

        let m = order + 1;
        let mut matrix = Vec::with_capacity(m * m);
        for s in 0..m {
            for &a in &scales {
                matrix.push(fmath::powi(a, -2 * s as i32));
            }
        }
        let mut rhs = alloc::vec![0.0; m];
        rhs[0] = 1.0;
        let omega = solve_square(matrix, rhs)?;

        let omega_bar = omega
            .iter()
            .zip(&scales)
            .map(|(&w, &a)| w * fmath::powi(a, -2 * (order as i32 + 1)))
            .sum();

        let config = Self { scales, omega, omega_bar };
        let residual = config.max_identity_residual();
        if residual > RESIDUAL_WARN {
            log::warn!(
                "debias system of order {order} is ill conditioned: identity residual {residual:e}"
            );
        }
        Ok(config)
    }

    /// Geometric ladder `a_r = (1 + gamma)^r`; `gamma = 0.05` is the
    /// conventional choice.
    pub fn geometric(order: usize, gamma: f64) -> Result<Self> {
        let scales = (0..=order).map(|r| fmath::powi(1.0 + gamma, r as i32)).collect();
        Self::new(scales)
    }

    /// Arithmetic ladder `a_r = 1 + gamma * r`.
    pub fn arithmetic(order: usize, gamma: f64) -> Result<Self> {
        let scales = (0..=order).map(|r| 1.0 + gamma * r as f64).collect();
        Self::new(scales)
    }

    /// The order-zero configuration: no debiasing.
    pub fn identity() -> Self {
        Self { scales: alloc::vec![1.0], omega: alloc::vec![1.0], omega_bar: 1.0 }
    }

    pub fn order(&self) -> usize {
        self.scales.len() - 1
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `sum_r omega_r a_r^{-2J-2}`, the coefficient on the surviving
    /// leading bias term.
    pub fn omega_bar(&self) -> f64 {
        self.omega_bar
    }

    /// Truncation to a lower order on the same ladder (used by robust
    /// lifetime selection, which tunes at order `J - 1`).
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order >= self.order() {
            return Ok(self.clone());
        }
        Self::new(self.scales[..=order].to_vec())
    }

    /// Largest violation of the defining identities
    /// `|sum_r omega_r a_r^{-2s} - e_0[s]|` over `s = 0..=J`.
    pub fn max_identity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..=self.order() {
            let lhs: f64 = self
                .omega
                .iter()
                .zip(&self.scales)
                .map(|(&w, &a)| w * fmath::powi(a, -2 * s as i32))
                .sum();
            let target = if s == 0 { 1.0 } else { 0.0 };
            let dev = fmath::abs(lhs - target);
            if dev > worst {
                worst = dev;
            }
        }
        worst
    }
}

/// A ladder of forests at lifetimes `a_r * lambda` sharing one training
/// sample, combined with the jackknife coefficients.
#[derive(Debug, Clone)]
pub struct DebiasedForest {
    levels: Vec<Forest>,
    config: DebiasConfig,
    base_lifetime: f64,
}

impl DebiasedForest {
    /// Fits `J + 1` forests of `size` trees each; level `r` uses lifetime
    /// `a_r * base_lifetime` and the tree substreams `(replicate, r, b)`,
    /// so trees are independent across levels and across the forest.
    pub fn fit(
        training: Arc<TrainingSet>,
        base_lifetime: f64,
        size: usize,
        config: DebiasConfig,
        stream: &RngStream,
        replicate: u64,
    ) -> Result<Self> {
        if !(base_lifetime > 0.0) || !base_lifetime.is_finite() {
            return Err(Error::InvalidLifetime(base_lifetime));
        }
        let levels = config
            .scales
            .iter()
            .enumerate()
            .map(|(r, &a)| {
                Forest::fit(
                    training.clone(),
                    a * base_lifetime,
                    size,
                    stream,
                    replicate,
                    r as u64,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, config, base_lifetime })
    }

    pub fn from_levels(levels: Vec<Forest>, config: DebiasConfig, base_lifetime: f64) -> Result<Self> {
        if levels.len() != config.order() + 1 {
            return Err(Error::DimensionMismatch {
                expected: config.order() + 1,
                got: levels.len(),
            });
        }
        Ok(Self { levels, config, base_lifetime })
    }

    pub fn config(&self) -> &DebiasConfig {
        &self.config
    }

    pub fn base_lifetime(&self) -> f64 {
        self.base_lifetime
    }

    /// Trees per level.
    pub fn size(&self) -> usize {
        self.levels[0].size()
    }

    pub fn levels(&self) -> &[Forest] {
        &self.levels
    }

    pub fn training(&self) -> &Arc<TrainingSet> {
        self.levels[0].training()
    }

    /// The debiased estimate `sum_r omega_r muhat_r(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (forest, &w) in self.levels.iter().zip(&self.config.omega) {
            total += w * forest.predict(x)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn order_zero_is_identity() {
        let c = DebiasConfig::new(vec![1.0]).unwrap();
        assert_eq!(c.omega(), &[1.0]);
        assert_eq!(c.omega_bar(), 1.0);
        assert_eq!(DebiasConfig::identity(), c);
    }

    #[test]
    fn order_one_matches_exact_solution() {
        // Exact 2x2 solution: omega = (-400/41, 441/41), omega_bar = -400/441.
        let c = DebiasConfig::new(vec![1.0, 1.05]).unwrap();
        assert!((c.omega()[0] - (-400.0 / 41.0)).abs() < 1e-9, "{}", c.omega()[0]);
        assert!((c.omega()[1] - (441.0 / 41.0)).abs() < 1e-9, "{}", c.omega()[1]);
        assert!((c.omega_bar() - (-400.0 / 441.0)).abs() < 1e-9);
    }

    #[test]
    fn order_two_identities_hold() {
        let c = DebiasConfig::new(vec![1.0, 1.05, 1.05 * 1.05]).unwrap();
        assert!(c.max_identity_residual() < 1e-10);
    }

    #[test]
    fn mixed_signs_and_mass_above_one() {
        for order in 1..=3 {
            let c = DebiasConfig::geometric(order, 0.05).unwrap();
            assert!(c.omega().iter().any(|&w| w < 0.0));
            assert!(c.omega().iter().any(|&w| w > 0.0));
            let l1: f64 = c.omega().iter().map(|w| w.abs()).sum();
            assert!(l1 > 1.0);
        }
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(matches!(
            DebiasConfig::new(vec![1.0, 1.05, 1.05]),
            Err(Error::DuplicateScale { first: 1, second: 2, .. })
        ));
        assert!(matches!(
            DebiasConfig::new(vec![2.0, 1.05]),
            Err(Error::BaseScaleNotOne(_))
        ));
        assert!(matches!(
            DebiasConfig::geometric(6, 0.05),
            Err(Error::OrderTooLarge { order: 6, max: MAX_ORDER })
        ));
        assert!(matches!(
            DebiasConfig::new(vec![1.0, -0.5]),
            Err(Error::NonPositiveScale { index: 1, .. })
        ));
    }

    #[test]
    fn truncation_reuses_the_ladder() {
        let c = DebiasConfig::geometric(2, 0.05).unwrap();
        let t = c.truncated(1).unwrap();
        assert_eq!(t.scales(), &c.scales()[..2]);
        assert_eq!(t.order(), 1);
    }

    fn toy_training() -> Arc<TrainingSet> {
        let xs = vec![0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95];
        let ys = vec![2.5; 7];
        Arc::new(TrainingSet::new(xs, ys, 1).unwrap())
    }

    #[test]
    fn level_lifetimes_follow_the_ladder() {
        let df = DebiasedForest::fit(
            toy_training(),
            10.0,
            3,
            DebiasConfig::new(vec![1.0, 1.05]).unwrap(),
            &RngStream::new(4),
            0,
        )
        .unwrap();
        assert_eq!(df.levels()[0].lifetime(), 10.0);
        assert_eq!(df.levels()[1].lifetime(), 10.5);
        assert_eq!(df.size(), 3);
    }

    #[test]
    fn refit_is_identical_and_order_zero_matches_plain_forest() {
        let training = toy_training();
        let stream = RngStream::new(12);
        let a = DebiasedForest::fit(training.clone(), 3.0, 4, DebiasConfig::identity(), &stream, 7)
            .unwrap();
        let b = DebiasedForest::fit(training.clone(), 3.0, 4, DebiasConfig::identity(), &stream, 7)
            .unwrap();
        let x = [0.41];
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());

        let plain = Forest::fit(training, 3.0, 4, &stream, 7, 0).unwrap();
        assert_eq!(a.predict(&x).unwrap(), plain.predict(&x).unwrap());
    }

    #[test]
    fn constant_responses_survive_debiasing() {
        let df = DebiasedForest::fit(
            toy_training(),
            2.0,
            4,
            DebiasConfig::new(vec![1.0, 1.05]).unwrap(),
            &RngStream::new(8),
            0,
        )
        .unwrap();
        // All cells contain a point at this lifetime; the combination of
        // constants differs from the constant only by coefficient round-off.
        let est = df.predict(&[0.5]).unwrap();
        assert!((est - 2.5).abs() < 1e-12, "{est}");
    }
}
