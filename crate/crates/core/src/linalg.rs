//! Small dense solvers: just enough linear algebra for the debiasing
//! system (at most 6x6) and the polynomial design regressions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::fmath;
use crate::Result;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// `A` is row-major `n x n` and is consumed.
pub(crate) fn solve_square(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for k in 0..n {
        let mut pivot = k;
        let mut best = fmath::abs(a[k * n + k]);
        for r in (k + 1)..n {
            let v = fmath::abs(a[r * n + k]);
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::CollinearDesign { pivot: k, ratio: 0.0 });
        }
        if pivot != k {
            for c in 0..n {
                a.swap(k * n + c, pivot * n + c);
            }
            b.swap(k, pivot);
        }
        for r in (k + 1)..n {
            let factor = a[r * n + k] / a[k * n + k];
            if factor == 0.0 {
                continue;
            }
            a[r * n + k] = 0.0;
            for c in (k + 1)..n {
                a[r * n + c] -= factor * a[k * n + c];
            }
            b[r] -= factor * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in (k + 1)..n {
            acc -= a[k * n + c] * x[c];
        }
        x[k] = acc / a[k * n + k];
    }
    Ok(x)
}

/// Least squares `min ||X beta - y||` via Householder QR with column
/// pivoting. Returns the coefficients and the residual sum of squares.
///
/// Rank deficiency is flagged when a pivot falls below `rank_tol` times
/// the leading pivot; the pivoted diagonal of `R` brackets the singular
/// values tightly enough for these small monomial designs.
pub(crate) fn least_squares(
    x: &[f64],
    y: &[f64],
    rows: usize,
    cols: usize,
    rank_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    debug_assert_eq!(x.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    if rows < cols {
        return Err(Error::InsufficientSamples { needed: cols, got: rows });
    }

    // Column-major working copy: column j lives in a[j*rows..(j+1)*rows].
    let mut a = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            a[c * rows + r] = x[r * cols + c];
        }
    }
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut first_pivot = 0.0f64;

    for k in 0..cols {
        // Pivot on the column with the largest remaining norm.
        let mut best = k;
        let mut best_norm = 0.0;
        for c in k..cols {
            let norm: f64 = a[c * rows + k..(c + 1) * rows].iter().map(|v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        if best != k {
            for r in 0..rows {
                a.swap(k * rows + r, best * rows + r);
            }
            perm.swap(k, best);
        }

        // Householder reflector annihilating column k below the diagonal.
        let norm = fmath::sqrt(
            a[k * rows + k..(k + 1) * rows].iter().map(|v| v * v).sum::<f64>(),
        );
        if k == 0 {
            first_pivot = norm;
        }
        if norm <= rank_tol * first_pivot {
            return Err(Error::CollinearDesign {
                pivot: perm[k],
                ratio: if first_pivot > 0.0 { norm / first_pivot } else { 0.0 },
            });
        }
        let alpha = if a[k * rows + k] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; rows - k];
        v[0] = a[k * rows + k] - alpha;
        v[1..].copy_from_slice(&a[k * rows + k + 1..(k + 1) * rows]);
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        a[k * rows + k] = alpha;
        for r in (k + 1)..rows {
            a[k * rows + r] = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        for c in (k + 1)..cols {
            let col = &mut a[c * rows + k..(c + 1) * rows];
            let dot: f64 = col.iter().zip(&v).map(|(t, s)| t * s).sum();
            let scale = 2.0 * dot / vnorm2;
            for (t, s) in col.iter_mut().zip(&v) {
                *t -= scale * s;
            }
        }
        let tail = &mut rhs[k..rows];
        let dot: f64 = tail.iter().zip(&v).map(|(t, s)| t * s).sum();
        let scale = 2.0 * dot / vnorm2;
        for (t, s) in tail.iter_mut().zip(&v) {
            *t -= scale * s;
        }
    }

    // Back-substitute R beta_perm = (Q^T y)[..cols].
    let mut beta_perm = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut acc = rhs[k];
        for c in (k + 1)..cols {
            acc -= a[c * rows + k] * beta_perm[c];
        }
        beta_perm[k] = acc / a[k * rows + k];
    }
    let mut beta = vec![0.0; cols];
    for k in 0..cols {
        beta[perm[k]] = beta_perm[k];
    }
    let rss: f64 = rhs[cols..].iter().map(|v| v * v).sum();
    Ok((beta, rss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [2 1; 1 3] x = [5; 10] -> x = (1, 3)
        let x = solve_square(vec![2.0, 1.0, 1.0, 3.0], vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_line() {
        // y = 2 + 3t sampled exactly: residual 0, coefficients exact.
        let ts = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &t in &ts {
            x.extend_from_slice(&[1.0, t]);
            y.push(2.0 + 3.0 * t);
        }
        let (beta, rss) = least_squares(&x, &y, ts.len(), 2, 1e-10).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-10);
        assert!((beta[1] - 3.0).abs() < 1e-10);
        assert!(rss < 1e-20);
    }

    #[test]
    fn least_squares_residual_matches_direct() {
        // Overdetermined noisy fit: RSS from the QR tail equals the
        // explicitly computed residual norm.
        let ts = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let ys = [0.1, 0.5, 0.4, 0.9, 0.7, 1.3];
        let mut x = Vec::new();
        for &t in &ts {
            x.extend_from_slice(&[1.0, t]);
        }
        let (beta, rss) = least_squares(&x, &ys, ts.len(), 2, 1e-10).unwrap();
        let direct: f64 = ts
            .iter()
            .zip(&ys)
            .map(|(&t, &y)| {
                let r = y - beta[0] - beta[1] * t;
                r * r
            })
            .sum();
        assert!((rss - direct).abs() < 1e-12, "{rss} vs {direct}");
    }

    #[test]
    fn detects_duplicate_columns() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for t in 0..6 {
            let t = t as f64 / 5.0;
            x.extend_from_slice(&[1.0, t, t]);
            y.push(t);
        }
        assert!(matches!(
            least_squares(&x, &y, 6, 3, 1e-10),
            Err(Error::CollinearDesign { .. })
        ));
    }
}
