//! Truncated SVD of a dense d x n matrix.
//!
//! `truncated_svd(M, k)` returns the top-k left singular vectors. The
//! driver forms the Gram matrix on the smaller side and diagonalizes it
//! with cyclic Jacobi rotations: exact at this crate's scale (the small
//! side is the client count, a few hundred at most), deterministic, and
//! free of the stagnation that successive-iterate stopping rules hit
//! when trailing singular values nearly tie. Each singular vector is
//! sign-canonicalized (largest-magnitude entry positive) so downstream
//! clustering sees run-to-run identical inputs.

use rand::Rng;

use super::matrix::{jacobi_eigh, DenseMatrix};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Relative threshold under which a singular value counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Result of a truncated SVD.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// d x k matrix whose columns are the top-k left singular vectors.
    pub basis: DenseMatrix,
    /// Singular value estimates, descending.
    pub singular_values: Vec<f64>,
    /// Jacobi sweeps spent diagonalizing the Gram matrix.
    pub iterations: usize,
    /// Set when k exceeded the numerical rank; the trailing columns are
    /// then an orthonormal completion, not singular directions.
    pub rank_deficient: bool,
}

#[allow(clippy::needless_range_loop)] // column indices address matrix and values together
pub fn truncated_svd(m: &DenseMatrix, k: usize) -> Result<TruncatedSvd> {
    let d = m.nrows();
    let n = m.ncols();
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidArgument(format!(
            "svd rank {k} out of range for a {d}x{n} matrix"
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "truncated svd input",
        });
    }

    // Gram matrix on the smaller side.
    let (gram, small_is_rows) = if d <= n {
        (gram_rows(m), true)
    } else {
        (gram_cols(m), false)
    };
    let (evals, evecs, sweeps) = jacobi_eigh(&gram)?;

    let singular_values: Vec<f64> = evals.iter().take(k).map(|&l| l.max(0.0).sqrt()).collect();
    let sigma_max = evals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let cutoff = RANK_TOL * sigma_max.max(1.0);

    let mut basis = DenseMatrix::zeros(d, k);
    let mut rank_deficient = false;
    // Deterministic fill for directions beyond the numerical rank.
    let mut completion =
        RngStream::new(0x5644, ((d as u64) << 32) | n as u64).derive("complete", &[k as u64]);
    for j in 0..k {
        if singular_values[j] > cutoff {
            if small_is_rows {
                // eigenvectors of M M^T are the left singular vectors
                for i in 0..d {
                    basis.set(i, j, evecs.get(i, j));
                }
            } else {
                // v_j = M u_j / sigma_j
                let u: Vec<f64> = (0..n).map(|i| evecs.get(i, j)).collect();
                let mut v = vec![0.0; d];
                m.matvec(&u, &mut v);
                let inv = 1.0 / singular_values[j];
                for i in 0..d {
                    basis.set(i, j, v[i] * inv);
                }
            }
        } else {
            rank_deficient = true;
            let mut col: Vec<f64> = (0..d).map(|_| gaussian(&mut completion)).collect();
            // orthogonalize against everything already in place
            for _pass in 0..2 {
                for prev in 0..j {
                    let dot: f64 = (0..d).map(|i| basis.get(i, prev) * col[i]).sum();
                    for (i, c) in col.iter_mut().enumerate() {
                        *c -= dot * basis.get(i, prev);
                    }
                }
            }
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (i, c) in col.iter().enumerate() {
                basis.set(i, j, c / norm);
            }
        }
    }

    canonicalize_signs(&mut basis);
    Ok(TruncatedSvd {
        basis,
        singular_values,
        iterations: sweeps,
        rank_deficient,
    })
}

/// `M M^T` (d x d), for d <= n.
fn gram_rows(m: &DenseMatrix) -> DenseMatrix {
    let d = m.nrows();
    let mut g = DenseMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let dot: f64 = m.row(a).iter().zip(m.row(b)).map(|(x, y)| x * y).sum();
            g.set(a, b, dot);
            g.set(b, a, dot);
        }
    }
    g
}

/// `M^T M` (n x n), for n < d. Accumulated row-wise for cache locality.
fn gram_cols(m: &DenseMatrix) -> DenseMatrix {
    let n = m.ncols();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..m.nrows() {
        let row = m.row(i);
        for a in 0..n {
            if row[a] == 0.0 {
                continue;
            }
            for b in a..n {
                g.set(a, b, g.get(a, b) + row[a] * row[b]);
            }
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            g.set(b, a, g.get(a, b));
        }
    }
    g
}

fn gaussian(rng: &mut RngStream) -> f64 {
    // Box-Muller; only used for orthonormal completion columns.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn canonicalize_signs(basis: &mut DenseMatrix) {
    let d = basis.nrows();
    for j in 0..basis.ncols() {
        let mut arg = 0;
        let mut best = 0.0f64;
        for i in 0..d {
            let a = basis.get(i, j).abs();
            if a > best {
                best = a;
                arg = i;
            }
        }
        if basis.get(arg, j) < 0.0 {
            for i in 0..d {
                basis.set(i, j, -basis.get(i, j));
            }
        }
    }
}
