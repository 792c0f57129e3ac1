//! A minimal row-major dense matrix and the few kernels the crate needs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::DimMismatch {
                    expected: ncols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix { nrows, ncols, data })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.data[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max |a_ij - a_ji| over all pairs; 0 for a symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols.min(self.nrows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `out = self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = self^T * x`.
    pub fn tr_matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        out.fill(0.0);
        for (i, xi) in x.iter().enumerate() {
            let row = self.row(i);
            for (o, a) in out.iter_mut().zip(row) {
                *o += xi * a;
            }
        }
    }
}

/// Pairwise Euclidean distances between the rows of `rows`.
///
/// Returns a symmetric n x n matrix with a zero diagonal.
pub fn pairwise_euclidean(rows: &DenseMatrix) -> Result<DenseMatrix> {
    if !rows.is_finite() {
        return Err(Error::NonFinite {
            context: "pairwise euclidean input",
        });
    }
    let n = rows.nrows();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = rows
                .row(i)
                .iter()
                .zip(rows.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d.set(i, j, dist);
            d.set(j, i, dist);
        }
    }
    Ok(d)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order, the matching eigenvectors
/// as columns, and the sweep count.
///
/// Quadratically convergent and deterministic; sized for the Gram
/// matrices of this crate (a few hundred on a side at most). Failure to
/// converge within the sweep limit is reported with the count.
pub fn jacobi_eigh(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix, usize)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigh needs a square matrix");
    const MAX_SWEEPS: usize = 64;

    // Work on a unit-scaled copy so the stopping rule is relative.
    let scale = a.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut m = a.clone();
    if scale > 0.0 {
        for v in m.data.iter_mut() {
            *v /= scale;
        }
    }
    let fro: f64 = m.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-14 * fro.max(1.0);

    let mut v = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            converged = true;
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { iterations: sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m.get(i, i) * scale).collect();
    order.sort_by(|&a, &b| evals[b].partial_cmp(&evals[a]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let sorted_vecs = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((sorted_vals, sorted_vecs, sweeps))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // index loops mirror the formulas under test
mod tests {
    use super::*;

    #[test]
    fn pairwise_one_dimensional() {
        let rows = DenseMatrix::from_rows(&[vec![0.0], vec![3.0]]).unwrap();
        let d = pairwise_euclidean(&rows).unwrap();
        assert_eq!(d.get(0, 1), 3.0);
        assert_eq!(d.get(1, 0), 3.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn pairwise_345_triangle() {
        let rows = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = pairwise_euclidean(&rows).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
    }

    #[test]
    fn pairwise_identical_rows_zero() {
        let rows = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]])
            .unwrap();
        let d = pairwise_euclidean(&rows).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1.
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs, _) = jacobi_eigh(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // eigenvector for 3 is (1,1)/sqrt(2) up to sign
        let ratio = vecs.get(0, 0) / vecs.get(1, 0);
        assert!((ratio - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_recovers_reconstruction() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 1.0],
        ])
        .unwrap();
        let (vals, vecs, _) = jacobi_eigh(&a).unwrap();
        // A == V diag(vals) V^T
        for i in 0..3 {
            for j in 0..3 {
                let mut rec = 0.0;
                for k in 0..3 {
                    rec += vecs.get(i, k) * vals[k] * vecs.get(j, k);
                }
                assert!((rec - a.get(i, j)).abs() < 1e-10, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn jacobi_handles_larger_gram_like_matrices() {
        // Near-tied trailing eigenvalues must not prevent convergence.
        let n = 40;
        let mut rng = crate::numkit::RngStream::new(17, 0);
        use rand::Rng as _;
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| b.get(i, k) * b.get(j, k)).sum::<f64>()
        });
        let (vals, vecs, sweeps) = jacobi_eigh(&a).unwrap();
        assert!(sweeps < 30);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // spot-check A v = lambda v for the leading eigenpair
        let v0: Vec<f64> = (0..n).map(|i| vecs.get(i, 0)).collect();
        for i in 0..n {
            let av: f64 = (0..n).map(|k| a.get(i, k) * v0[k]).sum();
            assert!((av - vals[0] * v0[i]).abs() < 1e-8 * vals[0].abs());
        }
    }
}
