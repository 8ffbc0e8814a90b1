//! Parallel forest fitting.
//!
//! Trees own disjoint substreams keyed by `(replicate, level, tree)`, so
//! sampling them on a thread pool yields bit-identical forests to the
//! sequential fit at any thread count.

use std::sync::Arc;

use mondrian_rf::debias::{DebiasConfig, DebiasedForest};
use mondrian_rf::forest::{Forest, TrainingSet};
use mondrian_rf::process::MondrianTree;
use mondrian_rf::rng::RngStream;
use rayon::prelude::*;

use crate::Result;

/// Drop-in parallel equivalent of [`Forest::fit`].
pub fn fit_forest(
    training: Arc<TrainingSet>,
    lifetime: f64,
    size: usize,
    stream: &RngStream,
    replicate: u64,
    level: u64,
) -> Result<Forest> {
    if size == 0 || !(lifetime > 0.0) {
        // Delegate the error paths to the sequential constructor.
        return Ok(Forest::fit(training, lifetime, size, stream, replicate, level)?);
    }
    let trees = (0..size)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.tree(replicate, level, b as u64);
            MondrianTree::sample(lifetime, training.dim(), &mut rng)
        })
        .collect::<mondrian_rf::Result<Vec<_>>>()?;
    Ok(Forest::from_trees(training, trees)?)
}

/// Drop-in parallel equivalent of [`DebiasedForest::fit`].
pub fn fit_debiased(
    training: Arc<TrainingSet>,
    base_lifetime: f64,
    size: usize,
    config: DebiasConfig,
    stream: &RngStream,
    replicate: u64,
) -> Result<DebiasedForest> {
    let levels = config
        .scales()
        .iter()
        .enumerate()
        .map(|(r, &a)| {
            fit_forest(training.clone(), a * base_lifetime, size, stream, replicate, r as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DebiasedForest::from_levels(levels, config, base_lifetime)?)
}
