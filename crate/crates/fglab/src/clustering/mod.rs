//! Similarity machinery over client update vectors, plus the two
//! clustering algorithms the grouped trainer uses.
//!
//! Two proximity measures are offered. MADC compares two clients by the
//! mean absolute difference of their cosine-similarity profiles against
//! everyone else; it needs the full pairwise cosine matrix. EDC first
//! projects the update matrix onto its top-m singular directions and
//! compares cosine profiles against those directions only, giving each
//! client a low-dimensional embedding that plain Euclidean K-Means can
//! cluster.

mod hierarchy;
mod kmeans;

pub use hierarchy::hierarchical_complete;
pub use kmeans::kmeans_pp;

use crate::error::{Error, Result};
use crate::numkit::{cosine_similarity, truncated_svd, DenseMatrix, ParamVector, UpdateMatrix};

/// Symmetric pairwise cosine similarity matrix with a unit diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    entries: DenseMatrix,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.entries
    }
}

/// Cluster labels plus, for K-Means, the feature-space centroids.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centers: Option<DenseMatrix>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().copied().max().map(|m| m + 1).unwrap_or(0)
    }

    /// Member indices per cluster label.
    pub fn members(&self, num_clusters: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); num_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Pairwise cosine similarity of the update rows.
pub fn similarity_matrix(updates: &UpdateMatrix) -> Result<SimilarityMatrix> {
    let n = updates.n();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, 1.0);
        // zero rows must be rejected even when they never pair up
        if updates.row(i).norm() == 0.0 {
            return Err(Error::ZeroVector {
                context: "similarity matrix row",
            });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine_similarity(updates.row(i), updates.row(j))?;
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
    Ok(SimilarityMatrix { entries: m })
}

/// Mean-of-absolute-differences proximity over cosine profiles:
/// `P[i][j] = (1/(n-2)) * sum_{z != i,j} |S(i,z) - S(j,z)|`.
pub fn madc_matrix(sim: &SimilarityMatrix) -> Result<DenseMatrix> {
    let n = sim.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "madc needs at least 3 clients, got {n}"
        )));
    }
    let mut p = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sum = 0.0;
            for z in 0..n {
                if z == i || z == j {
                    continue;
                }
                sum += (sim.get(i, z) - sim.get(j, z)).abs();
            }
            let v = sum / (n - 2) as f64;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    Ok(p)
}

/// The decomposed-cosine embedding and its pairwise distances.
#[derive(Debug, Clone)]
pub struct EdcResult {
    /// n x m matrix; entry (i, j) is the cosine of update i against
    /// decomposed direction j.
    pub features: DenseMatrix,
    /// n x n symmetric distance matrix `(1/m) * ||features_i - features_j||`.
    pub pairwise: DenseMatrix,
    /// True when the update matrix had rank below m.
    pub rank_deficient: bool,
}

/// Euclidean distance of decomposed cosine similarity.
///
/// Decomposes the update matrix into its top-m left singular directions
/// and embeds each client as its cosine profile against them. Rows are
/// unit-normalized before the decomposition: the measure compares
/// optimization directions, so rescaling any client's update must not
/// move the embedding.
pub fn edc(updates: &UpdateMatrix, m: usize) -> Result<EdcResult> {
    let n = updates.n();
    if m == 0 || m > n.min(updates.dim()) {
        return Err(Error::InvalidArgument(format!(
            "edc rank {m} out of range for {n} updates of dim {}",
            updates.dim()
        )));
    }
    let normalized = UpdateMatrix::new(
        updates
            .rows()
            .iter()
            .map(|r| {
                let norm = r.norm();
                if norm == 0.0 {
                    return Err(Error::ZeroVector {
                        context: "edc update row",
                    });
                }
                let mut unit = r.clone();
                unit.scale(1.0 / norm);
                Ok(unit)
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let svd = truncated_svd(&normalized.transposed(), m)?;
    let directions: Vec<ParamVector> = (0..m)
        .map(|j| ParamVector::from_vec(svd.basis.col(j)))
        .collect();
    let mut features = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for (j, dir) in directions.iter().enumerate() {
            features.set(i, j, cosine_similarity(updates.row(i), dir)?);
        }
    }
    let mut pairwise = crate::numkit::pairwise_euclidean(&features)?;
    let scale = 1.0 / m as f64;
    for i in 0..n {
        for j in 0..n {
            pairwise.set(i, j, pairwise.get(i, j) * scale);
        }
    }
    Ok(EdcResult {
        features,
        pairwise,
        rank_deficient: svd.rank_deficient,
    })
}
