//! Exact sampling of Mondrian trees.
//!
//! A Mondrian tree on `[0,1]^d` with lifetime `lambda` is grown by an
//! exponential race: a cell `D` formed at time `t_D` draws
//! `E_D ~ Exp(|D|_1)` with `|D|_1` its half-perimeter. If
//! `t_D + E_D <= lambda` the cell splits, choosing the split dimension `j`
//! with probability `|D_j| / |D|_1` and the split location uniformly on
//! that side; both children inherit formation time `t_D + E_D`. Cells
//! whose race outlives the lifetime become leaves, and the leaves tile the
//! unit cube.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::cell::{check_point, Cell};
use crate::error::Error;
use crate::rng::{exponential, unit_open};
use crate::Result;

/// Hard cap on nodes per tree, guarding against a misconfigured lifetime.
pub const MAX_NODES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { dim: usize, loc: f64, time: f64, left: u32, right: u32 },
    Leaf { cell: Cell, time: f64 },
}

/// A sampled Mondrian partition, stored as a parent-before-children arena.
///
/// Trees are immutable after sampling and safe to share across threads;
/// queries are read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct MondrianTree {
    lifetime: f64,
    dim: usize,
    nodes: Vec<Node>,
}

impl MondrianTree {
    /// Samples a tree from `M([0,1]^d, lifetime)`.
    ///
    /// The draw order per cell is fixed (race, then dimension, then
    /// location), so a given stream always reproduces the same tree.
    /// A lifetime of zero yields the trivial single-leaf partition.
    pub fn sample(lifetime: f64, dim: usize, rng: &mut impl RngCore) -> Result<Self> {
        if !(lifetime >= 0.0) || !lifetime.is_finite() {
            return Err(Error::InvalidLifetime(lifetime));
        }
        let root = Cell::unit(dim)?;
        let mut nodes = Vec::new();
        Self::grow(root, 0.0, lifetime, rng, &mut nodes)?;
        Ok(Self { lifetime, dim, nodes })
    }

    fn grow(
        cell: Cell,
        formed: f64,
        lifetime: f64,
        rng: &mut impl RngCore,
        nodes: &mut Vec<Node>,
    ) -> Result<u32> {
        if nodes.len() >= MAX_NODES {
            return Err(Error::NodeBudgetExceeded {
                lifetime,
                dim: cell.dim(),
                max_nodes: MAX_NODES,
            });
        }
        let race = formed + exponential(rng, cell.linear_dim());
        if race > lifetime {
            nodes.push(Node::Leaf { cell, time: formed });
            return Ok((nodes.len() - 1) as u32);
        }

        let dim = pick_dimension(&cell, rng);
        let loc = pick_location(&cell, dim, rng);
        let (lower_half, upper_half) = cell.split(dim, loc);

        let idx = nodes.len();
        nodes.push(Node::Split { dim, loc, time: race, left: 0, right: 0 });
        let left = Self::grow(lower_half, race, lifetime, rng, nodes)?;
        let right = Self::grow(upper_half, race, lifetime, rng, nodes)?;
        match &mut nodes[idx] {
            Node::Split { left: l, right: r, .. } => {
                *l = left;
                *r = right;
            }
            Node::Leaf { .. } => unreachable!(),
        }
        Ok(idx as u32)
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Leaf cells with their formation times; together they tile the cube.
    pub fn leaves(&self) -> impl Iterator<Item = (&Cell, f64)> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { cell, time } => Some((cell, *time)),
            Node::Split { .. } => None,
        })
    }

    /// Arena index of the leaf containing `x`; stable for a given tree, so
    /// it can key per-leaf accumulators.
    pub fn leaf_of(&self, x: &[f64]) -> Result<usize> {
        check_point(x, self.dim)?;
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return Ok(idx),
                Node::Split { dim, loc, left, right, .. } => {
                    // Half-open cells: the split location itself goes right.
                    idx = if x[*dim] < *loc { *left as usize } else { *right as usize };
                }
            }
        }
    }

    /// The unique leaf cell whose half-open box contains `x`.
    pub fn cell_containing(&self, x: &[f64]) -> Result<&Cell> {
        let idx = self.leaf_of(x)?;
        match &self.nodes[idx] {
            Node::Leaf { cell, .. } => Ok(cell),
            Node::Split { .. } => unreachable!(),
        }
    }

    #[cfg(test)]
    fn split_times_increase(&self) -> bool {
        fn walk(nodes: &[Node], idx: usize, parent_time: f64) -> bool {
            match &nodes[idx] {
                Node::Leaf { time, .. } => *time >= parent_time,
                Node::Split { time, left, right, .. } => {
                    *time > parent_time
                        && walk(nodes, *left as usize, *time)
                        && walk(nodes, *right as usize, *time)
                }
            }
        }
        walk(&self.nodes, 0, 0.0)
    }
}

fn pick_dimension(cell: &Cell, rng: &mut impl RngCore) -> usize {
    let target = unit_open(rng) * cell.linear_dim();
    let mut acc = 0.0;
    for j in 0..cell.dim() {
        acc += cell.side(j);
        if target < acc {
            return j;
        }
    }
    cell.dim() - 1
}

fn pick_location(cell: &Cell, dim: usize, rng: &mut impl RngCore) -> f64 {
    let (lo, hi) = (cell.lower()[dim], cell.upper()[dim]);
    // Resample until strictly interior; with 53-bit uniforms this loops
    // only if rounding lands exactly on an endpoint of a very thin side.
    loop {
        let loc = lo + unit_open(rng) * (hi - lo);
        if lo < loc && loc < hi {
            return loc;
        }
    }
}

/// Number of rows of the row-major matrix `points` (row length
/// `cell.dim()`) that fall in `cell`, under the same half-open membership
/// convention as [`MondrianTree::cell_containing`].
pub fn count_points_in(cell: &Cell, points: &[f64]) -> usize {
    let d = cell.dim();
    debug_assert_eq!(points.len() % d, 0);
    points.chunks_exact(d).filter(|row| cell.contains(row)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use alloc::vec;

    #[test]
    fn zero_lifetime_is_trivial_partition() {
        let mut rng = RngStream::new(1).tree(0, 0, 0);
        let tree = MondrianTree::sample(0.0, 2, &mut rng).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        let cell = tree.cell_containing(&[0.3, 0.9]).unwrap();
        assert_eq!(cell.lower(), &[0.0, 0.0]);
        assert_eq!(cell.upper(), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = RngStream::new(1).tree(0, 0, 0);
        assert!(matches!(
            MondrianTree::sample(-1.0, 2, &mut rng),
            Err(Error::InvalidLifetime(_))
        ));
        assert!(matches!(
            MondrianTree::sample(f64::NAN, 2, &mut rng),
            Err(Error::InvalidLifetime(_))
        ));
        assert_eq!(MondrianTree::sample(1.0, 0, &mut rng).unwrap_err(), Error::ZeroDimension);
    }

    #[test]
    fn one_split_routes_queries() {
        // Hand-built tree with a single split at x_1 = 0.5.
        let root = Cell::unit(2).unwrap();
        let (left, right) = root.split(0, 0.5);
        let tree = MondrianTree {
            lifetime: 1.0,
            dim: 2,
            nodes: vec![
                Node::Split { dim: 0, loc: 0.5, time: 0.4, left: 1, right: 2 },
                Node::Leaf { cell: left, time: 0.4 },
                Node::Leaf { cell: right, time: 0.4 },
            ],
        };
        assert_eq!(tree.cell_containing(&[0.25, 0.7]).unwrap().upper()[0], 0.5);
        assert_eq!(tree.cell_containing(&[0.5, 0.7]).unwrap().lower()[0], 0.5);
        assert!(tree.cell_containing(&[0.25, 1.5]).is_err());
    }

    #[test]
    fn partition_and_time_invariants() {
        let stream = RngStream::new(99);
        for b in 0..50 {
            let mut rng = stream.tree(0, 0, b);
            let tree = MondrianTree::sample(3.0, 2, &mut rng).unwrap();
            let total: f64 = tree.leaves().map(|(c, _)| c.volume()).sum();
            assert!((total - 1.0).abs() < 1e-12, "volumes sum to {total}");
            assert!(tree.split_times_increase());
            let mut query = stream.aux(0, b);
            for _ in 0..20 {
                let x = [unit_open(&mut query), unit_open(&mut query)];
                let hits =
                    tree.leaves().filter(|(c, _)| c.contains(&x)).count();
                assert_eq!(hits, 1, "point {x:?} must land in exactly one leaf");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let stream = RngStream::new(7);
        let a = MondrianTree::sample(5.0, 3, &mut stream.tree(2, 1, 4)).unwrap();
        let b = MondrianTree::sample(5.0, 3, &mut stream.tree(2, 1, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn count_points_examples() {
        let cell = Cell::unit(2).unwrap();
        assert_eq!(count_points_in(&cell, &[]), 0);
        let seven: Vec<f64> = (0..7).flat_map(|i| [i as f64 / 7.0, 0.5]).collect();
        assert_eq!(count_points_in(&cell, &seven), 7);
        let (left, _) = cell.split(0, 0.5);
        assert_eq!(count_points_in(&left, &[0.4, 0.9, 0.6, 0.1]), 1);
    }
}
