//! Agglomerative hierarchical clustering with complete linkage.
//!
//! Merges the pair of clusters with the smallest maximum pairwise
//! proximity until the requested number of clusters remains. Ties break
//! toward the lowest (i, j) index pair, so the output is deterministic.

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

#[allow(clippy::needless_range_loop)] // index pairs drive two matrices at once
pub fn hierarchical_complete(proximity: &DenseMatrix, k: usize) -> Result<ClusterAssignment> {
    let n = proximity.nrows();
    if proximity.ncols() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: proximity.ncols(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if proximity.asymmetry() > 1e-12 {
        return Err(Error::InvalidArgument(
            "proximity matrix must be symmetric".into(),
        ));
    }
    for i in 0..n {
        if proximity.get(i, i) != 0.0 {
            return Err(Error::InvalidArgument(
                "proximity matrix must have a zero diagonal".into(),
            ));
        }
    }

    // Live clusters keyed by their smallest member; complete-linkage
    // distances updated on merge as max(d(a, x), d(b, x)).
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut dist = proximity.clone();
    let mut live = n;
    while live > k {
        let mut best = f64::INFINITY;
        let mut pair = (usize::MAX, usize::MAX);
        for i in 0..n {
            if members[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if members[j].is_none() {
                    continue;
                }
                let d = dist.get(i, j);
                if d < best {
                    best = d;
                    pair = (i, j);
                }
            }
        }
        let (a, b) = pair;
        let absorbed = members[b].take().expect("b is live");
        members[a].as_mut().expect("a is live").extend(absorbed);
        for x in 0..n {
            if x == a || members[x].is_none() {
                continue;
            }
            let d = dist.get(a, x).max(dist.get(b, x));
            dist.set(a, x, d);
            dist.set(x, a, d);
        }
        live -= 1;
    }

    // Label clusters 0..k-1 in order of their smallest member.
    let mut labels = vec![0usize; n];
    let mut next = 0usize;
    for list in members.iter().flatten() {
        for &i in list {
            labels[i] = next;
        }
        next += 1;
    }
    debug_assert_eq!(next, k);
    Ok(ClusterAssignment {
        labels,
        centers: None,
    })
}
