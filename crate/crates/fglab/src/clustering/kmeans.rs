//! K-Means++ seeding followed by Lloyd iterations.
//!
//! Deterministic per seed: seeding draws from the given stream, Lloyd
//! breaks assignment ties toward the lowest center index, and an empty
//! cluster is repaired by reseeding its center at the point currently
//! farthest from its own center.

use rand::Rng;

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, RngStream};

const MAX_ITERS: usize = 300;
const SHIFT_TOL: f64 = 1e-9;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[allow(clippy::needless_range_loop)] // center indices address several arrays
pub fn kmeans_pp(points: &DenseMatrix, k: usize, rng: &mut RngStream) -> Result<ClusterAssignment> {
    let n = points.nrows();
    let dim = points.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite {
            context: "kmeans input",
        });
    }

    // k-means++ seeding: first center uniform, then D^2 sampling.
    let mut centers = DenseMatrix::zeros(k, dim);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all remaining mass at existing centers (duplicate points);
            // fall back to the lowest index not already chosen
            (0..n)
                .find(|&i| (0..c).all(|cc| points.row(i) != centers.row(cc)))
                .unwrap_or(0)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }

    // Lloyd iterations.
    let mut labels = vec![0usize; n];
    for _iter in 0..MAX_ITERS {
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for c in 0..k {
                let d = sq_dist(points.row(i), centers.row(c));
                if d < best {
                    best = d;
                    arg = c;
                }
            }
            *label = arg;
        }

        // Empty-cluster repair: move the center onto the point farthest
        // from its own center (skipped when every distance is zero).
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_i = None;
            let mut far_d = 0.0;
            for i in 0..n {
                if counts[labels[i]] <= 1 {
                    continue;
                }
                let d = sq_dist(points.row(i), centers.row(labels[i]));
                if d > far_d {
                    far_d = d;
                    far_i = Some(i);
                }
            }
            if let Some(i) = far_i {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                let row: Vec<f64> = points.row(i).to_vec();
                centers.row_mut(c).copy_from_slice(&row);
            }
        }

        // Mean update.
        let mut shift = 0.0f64;
        let mut sums = DenseMatrix::zeros(k, dim);
        let mut sizes = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            let row = points.row(i);
            let acc = sums.row_mut(l);
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            let mut moved = 0.0;
            for j in 0..dim {
                let newv = sums.get(c, j) * inv;
                let old = centers.get(c, j);
                moved += (newv - old) * (newv - old);
                centers.set(c, j, newv);
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < SHIFT_TOL {
            break;
        }
    }

    // Final assignment against the converged centers.
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for c in 0..k {
            let d = sq_dist(points.row(i), centers.row(c));
            if d < best {
                best = d;
                arg = c;
            }
        }
        *label = arg;
    }

    Ok(ClusterAssignment {
        labels,
        centers: Some(centers),
    })
}
