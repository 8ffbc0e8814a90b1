//! Distributional checks of the tree sampler against closed-form laws.
//!
//! In one dimension the split locations form a rate-lambda Poisson
//! process, so the expected leaf count is 1 + lambda; and the cell at an
//! interior point has sides distributed like truncated sums of two
//! exponentials. Both were verified by brute-force simulation before
//! being frozen here.

use mondrian_rf::process::MondrianTree;
use mondrian_rf::rng::RngStream;
use mondrian_rf::theory::cell_shape_sampler;

fn two_sample_ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut ks = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        ks = ks.max((i as f64 / n - j as f64 / m).abs());
    }
    ks
}

#[test]
fn one_dimensional_split_intensity() {
    let stream = RngStream::new(61);
    let reps = 10_000usize;
    let total: usize = (0..reps)
        .map(|b| {
            MondrianTree::sample(5.0, 1, &mut stream.tree(0, 0, b as u64))
                .unwrap()
                .leaf_count()
        })
        .sum();
    let mean = total as f64 / reps as f64;
    assert!((mean / 6.0 - 1.0).abs() < 0.02, "mean leaf count {mean}, expected 6");
}

#[test]
fn cell_shape_matches_the_closed_form_law() {
    let lambda = 20.0;
    let stream = RngStream::new(62);
    let tree_sides: Vec<f64> = (0..10_000)
        .map(|b| {
            let tree = MondrianTree::sample(lambda, 1, &mut stream.tree(0, 0, b)).unwrap();
            tree.cell_containing(&[0.5]).unwrap().side(0)
        })
        .collect();
    let mut rng = stream.aux(1, 0);
    let oracle: Vec<f64> = (0..200_000)
        .map(|_| cell_shape_sampler(&[0.5], lambda, &mut rng).unwrap()[0])
        .collect();
    let ks = two_sample_ks(tree_sides, oracle);
    assert!(ks < 0.02, "KS distance {ks}");
}

#[test]
fn oracle_mean_matches_the_integral() {
    // E[(E/lambda ^ 1/2)] = (1 - exp(-lambda/2)) / lambda per side.
    let lambda = 20.0;
    let mut rng = RngStream::new(63).aux(2, 0);
    let n = 1_000_000usize;
    let mean: f64 = (0..n)
        .map(|_| cell_shape_sampler(&[0.5], lambda, &mut rng).unwrap()[0])
        .sum::<f64>()
        / n as f64;
    let analytic = 2.0 * (1.0 - (-lambda * 0.5f64).exp()) / lambda;
    assert!((mean / analytic - 1.0).abs() < 0.005, "mean {mean} vs {analytic}");
}

#[test]
fn interior_side_length_approaches_two_over_lambda() {
    let lambda = 50.0;
    let stream = RngStream::new(64);
    let reps = 10_000usize;
    let mean: f64 = (0..reps)
        .map(|b| {
            let tree = MondrianTree::sample(lambda, 1, &mut stream.tree(0, 0, b as u64)).unwrap();
            tree.cell_containing(&[0.5]).unwrap().side(0)
        })
        .sum::<f64>()
        / reps as f64;
    assert!((mean / (2.0 / lambda) - 1.0).abs() < 0.03, "mean side {mean}");
}

#[test]
fn marginal_sides_follow_the_law_in_two_dimensions() {
    // Same law per coordinate at an interior point, lambda large.
    let lambda = 25.0;
    let stream = RngStream::new(65);
    let x = [0.4, 0.6];
    let sides: Vec<f64> = (0..6_000)
        .map(|b| {
            let tree = MondrianTree::sample(lambda, 2, &mut stream.tree(0, 0, b)).unwrap();
            tree.cell_containing(&x).unwrap().side(1)
        })
        .collect();
    let mut rng = stream.aux(3, 0);
    let oracle: Vec<f64> = (0..120_000)
        .map(|_| cell_shape_sampler(&x, lambda, &mut rng).unwrap()[1])
        .collect();
    let ks = two_sample_ks(sides, oracle);
    assert!(ks < 0.03, "KS distance {ks}");
}
