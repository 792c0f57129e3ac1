//! Flattened parameter vectors and stacks of client updates.

use crate::error::{Error, Result};

/// A flattened model parameter or update vector.
///
/// This is the currency of aggregation and similarity: model weights,
/// local updates and group directions all travel as `ParamVector`s.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &ParamVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out.add_scaled(1.0, other);
        out
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Mean of a nonempty set of equal-dimension vectors.
    pub fn mean_of(vectors: &[ParamVector]) -> Result<ParamVector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidArgument("mean of empty vector set".into()))?;
        let mut out = ParamVector::zeros(first.dim());
        for v in vectors {
            if v.dim() != out.dim() {
                return Err(Error::DimMismatch {
                    expected: out.dim(),
                    got: v.dim(),
                });
            }
            out.add_scaled(1.0, v);
        }
        out.scale(1.0 / vectors.len() as f64);
        Ok(out)
    }
}

/// Cosine similarity of two nonzero vectors, clamped into [-1, 1].
///
/// A zero-norm input is reported as an error: in this codebase it
/// signals a degenerate client update rather than a valid direction.
pub fn cosine_similarity(u: &ParamVector, v: &ParamVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector {
            context: "cosine similarity",
        });
    }
    let s = u.dot(v) / (nu * nv);
    if !s.is_finite() {
        return Err(Error::NonFinite {
            context: "cosine similarity",
        });
    }
    Ok(s.clamp(-1.0, 1.0))
}

/// An n x d stack of client update vectors, one row per client.
#[derive(Debug, Clone)]
pub struct UpdateMatrix {
    rows: Vec<ParamVector>,
}

impl UpdateMatrix {
    pub fn new(rows: Vec<ParamVector>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("update matrix needs at least one row".into()))?;
        let dim = first.dim();
        for r in &rows {
            if r.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: r.dim(),
                });
            }
            if !r.is_finite() {
                return Err(Error::NonFinite {
                    context: "update matrix row",
                });
            }
        }
        Ok(UpdateMatrix { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn row(&self, i: usize) -> &ParamVector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[ParamVector] {
        &self.rows
    }

    /// Materialize the d x n transpose (updates as columns), the layout
    /// consumed by the truncated SVD.
    pub fn transposed(&self) -> super::DenseMatrix {
        let n = self.n();
        let d = self.dim();
        let mut m = super::DenseMatrix::zeros(d, n);
        for (j, row) in self.rows.iter().enumerate() {
            for (i, v) in row.as_slice().iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    /// Row-major copy as a dense matrix (one row per client).
    pub fn as_dense(&self) -> super::DenseMatrix {
        let mut m = super::DenseMatrix::zeros(self.n(), self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(row.as_slice());
        }
        m
    }
}
