//! Axis-aligned boxes inside the unit cube.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// An axis-aligned box `prod_j [lower_j, upper_j]` in `[0,1]^d`, the leaf
/// shape of a Mondrian partition.
///
/// Membership is half-open: a point belongs to the cell when
/// `lower_j <= x_j < upper_j` in every dimension, except that the global
/// upper face of the unit cube is closed (`x_j = 1` belongs to cells with
/// `upper_j = 1`). This makes the cell containing a point unique at split
/// boundaries; splits are atomless, so the convention does not change the
/// law of anything sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Cell {
    /// The unit cube `[0,1]^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { lower: vec![0.0; dim], upper: vec![1.0; dim] })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Side length along dimension `j`.
    pub fn side(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Volume `prod_j (upper_j - lower_j)`.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Linear dimension (half-perimeter) `sum_j (upper_j - lower_j)`; the
    /// exponential split rate of the Mondrian process.
    pub fn linear_dim(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).sum()
    }

    /// Membership under the half-open convention described on the type.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        self.lower.iter().zip(&self.upper).zip(x).all(|((&l, &u), &xi)| {
            xi >= l && (xi < u || (u == 1.0 && xi <= 1.0))
        })
    }

    /// Splits the cell at `loc` along `dim`, returning the lower and upper
    /// halves.
    pub(crate) fn split(&self, dim: usize, loc: f64) -> (Cell, Cell) {
        debug_assert!(self.lower[dim] < loc && loc < self.upper[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = loc;
        right.lower[dim] = loc;
        (left, right)
    }
}

/// Validates that `x` is a point of the unit cube of dimension `dim`.
pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    for (j, &xi) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::PointOutOfDomain { dim: j, value: xi });
        }
    }
    Ok(())
}
