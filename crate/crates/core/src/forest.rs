//! Mondrian random forests: fitting and the point estimator.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::cell::check_point;
use crate::error::Error;
use crate::process::MondrianTree;
use crate::rng::RngStream;
use crate::Result;

/// Immutable training sample: covariates in `[0,1]^d` (row-major) and
/// real-valued responses. Shared by reference across every forest and
/// debiasing level fitted from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Vec<f64>,
    y: Vec<f64>,
    dim: usize,
}

impl TrainingSet {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if y.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if x.len() != y.len() * dim {
            return Err(Error::LengthMismatch { x_rows: x.len() / dim, y_len: y.len() });
        }
        for (row, chunk) in x.chunks_exact(dim).enumerate() {
            for (j, &v) in chunk.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::CovariateOutOfRange { row, dim: j, value: v });
                }
            }
        }
        Ok(Self { x, y, dim })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major covariate storage, row length `dim`.
    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// A forest of independent Mondrian trees at a common lifetime, plus the
/// training sample they smooth.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<MondrianTree>,
    lifetime: f64,
    training: Arc<TrainingSet>,
}

impl Forest {
    /// Fits `size` mutually independent trees at `lifetime`. Tree `b`
    /// draws from the substream `(replicate, level, b)`, so refitting with
    /// the same stream reproduces the forest exactly, and trees may be
    /// sampled in any order or in parallel without changing the result.
    pub fn fit(
        training: Arc<TrainingSet>,
        lifetime: f64,
        size: usize,
        stream: &RngStream,
        replicate: u64,
        level: u64,
    ) -> Result<Self> {
        if !(lifetime > 0.0) || !lifetime.is_finite() {
            return Err(Error::InvalidLifetime(lifetime));
        }
        if size == 0 {
            return Err(Error::ZeroForestSize);
        }
        let trees = (0..size)
            .map(|b| {
                let mut rng = stream.tree(replicate, level, b as u64);
                MondrianTree::sample(lifetime, training.dim(), &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees, lifetime, training })
    }

    /// Assembles a forest from trees sampled elsewhere (for example in
    /// parallel); they must share a lifetime and match the training
    /// dimension.
    pub fn from_trees(training: Arc<TrainingSet>, trees: Vec<MondrianTree>) -> Result<Self> {
        let first = trees.first().ok_or(Error::ZeroForestSize)?;
        let lifetime = first.lifetime();
        for t in &trees {
            if t.lifetime() != lifetime {
                return Err(Error::MixedLifetimes { expected: lifetime, got: t.lifetime() });
            }
            if t.dim() != training.dim() {
                return Err(Error::DimensionMismatch {
                    expected: training.dim(),
                    got: t.dim(),
                });
            }
        }
        Ok(Self { trees, lifetime, training })
    }

    pub fn size(&self) -> usize {
        self.trees.len()
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn trees(&self) -> &[MondrianTree] {
        &self.trees
    }

    pub fn training(&self) -> &Arc<TrainingSet> {
        &self.training
    }

    /// Count and response sum of the training points in tree `b`'s cell
    /// at `x`.
    pub(crate) fn cell_stats(&self, b: usize, x: &[f64]) -> Result<(usize, f64)> {
        let cell = self.trees[b].cell_containing(x)?;
        let d = self.training.dim();
        let mut count = 0usize;
        let mut sum = 0.0;
        for (row, &y) in self.training.covariates().chunks_exact(d).zip(self.training.responses())
        {
            if cell.contains(row) {
                count += 1;
                sum += y;
            }
        }
        Ok((count, sum))
    }

    /// The forest estimate at `x`: the average over trees of the mean
    /// response in the tree's cell, with an empty cell contributing zero
    /// (the 0/0 = 0 convention) while the divisor stays the forest size.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.training.dim())?;
        let mut total = 0.0;
        for b in 0..self.trees.len() {
            let (count, sum) = self.cell_stats(b, x)?;
            if count > 0 {
                total += sum / count as f64;
            }
        }
        Ok(total / self.trees.len() as f64)
    }

    /// Linear-smoother weights at `x`: `w_i = (1/B) sum_b 1{X_i in
    /// T_b(x)} / N_b(x)`, so `predict(x) = sum_i w_i Y_i` and `sum_i w_i`
    /// equals the fraction of trees with a nonempty cell.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.training.dim())?;
        let n = self.training.len();
        let d = self.training.dim();
        let inv_b = 1.0 / self.trees.len() as f64;
        let mut w = vec![0.0; n];
        let mut members = Vec::new();
        for tree in &self.trees {
            let cell = tree.cell_containing(x)?;
            members.clear();
            for (i, row) in self.training.covariates().chunks_exact(d).enumerate() {
                if cell.contains(row) {
                    members.push(i);
                }
            }
            if members.is_empty() {
                continue;
            }
            let add = inv_b / members.len() as f64;
            for &i in &members {
                w[i] += add;
            }
        }
        Ok(w)
    }
}
