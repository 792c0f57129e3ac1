//! Label-limited non-IID partitioning of a labeled pool.
//!
//! Each client receives at most `classes_per_client` distinct classes;
//! samples are drawn without replacement and shard sizes follow the
//! crate-wide power law scaled to the pool.

use rand::seq::SliceRandom;

use super::{power_law_sizes, train_test_split, ClientShard, FederatedDataset, Provenance};
use crate::error::{Error, Result};
use crate::models::Batch;
use crate::numkit::{DenseMatrix, RngStream};

pub fn partition_noniid(
    features: &DenseMatrix,
    labels: &[usize],
    n_clients: usize,
    classes_per_client: usize,
    rng: &mut RngStream,
) -> Result<FederatedDataset> {
    if features.nrows() != labels.len() {
        return Err(Error::DimMismatch {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if n_clients == 0 {
        return Err(Error::InvalidArgument("need at least one client".into()));
    }
    let num_classes = labels
        .iter()
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| Error::InvalidArgument("empty pool".into()))?;
    if classes_per_client == 0 || classes_per_client > num_classes {
        return Err(Error::InvalidArgument(format!(
            "classes_per_client must be in [1, {num_classes}], got {classes_per_client}"
        )));
    }
    let pool = labels.len();
    if pool < 2 * n_clients {
        return Err(Error::InfeasiblePartition(format!(
            "pool of {pool} samples cannot give {n_clients} clients a train and a test example each"
        )));
    }

    // Per-class stacks, shuffled once; samples are drawn by popping.
    let mut class_pools: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        class_pools[l].push(i);
    }
    {
        let mut shuffler = rng.derive("class_pools", &[]);
        for p in class_pools.iter_mut() {
            p.shuffle(&mut shuffler);
        }
    }

    let sizes = power_law_sizes(n_clients, Some(pool), &mut rng.derive("sizes", &[]));
    let mut picker = rng.derive("classes", &[]);

    let mut shards = Vec::with_capacity(n_clients);
    for (client_id, &want) in sizes.iter().enumerate() {
        // Candidate classes, fullest first, with a shuffled window so
        // depletion does not force every client onto the same labels.
        let mut candidates: Vec<usize> = (0..num_classes)
            .filter(|&c| !class_pools[c].is_empty())
            .collect();
        candidates.sort_by_key(|&c| std::cmp::Reverse(class_pools[c].len()));
        let window = (2 * classes_per_client).min(candidates.len());
        let mut head: Vec<usize> = candidates[..window].to_vec();
        head.shuffle(&mut picker);
        let chosen: Vec<usize> = head.into_iter().take(classes_per_client).collect();
        if chosen.is_empty() {
            return Err(Error::InfeasiblePartition(format!(
                "pool exhausted before client {client_id}"
            )));
        }

        // Even split across the chosen classes, spilling leftovers to
        // whichever chosen class still has samples.
        let mut taken: Vec<usize> = Vec::with_capacity(want);
        let share = want / chosen.len();
        let mut remainder = want % chosen.len();
        for &cls in &chosen {
            let mut quota = share;
            if remainder > 0 {
                quota += 1;
                remainder -= 1;
            }
            for _ in 0..quota {
                match class_pools[cls].pop() {
                    Some(idx) => taken.push(idx),
                    None => break,
                }
            }
        }
        let mut deficit = want.saturating_sub(taken.len());
        while deficit > 0 {
            let mut progressed = false;
            for &cls in &chosen {
                if deficit == 0 {
                    break;
                }
                if let Some(idx) = class_pools[cls].pop() {
                    taken.push(idx);
                    deficit -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        if taken.len() < 2 {
            return Err(Error::InfeasiblePartition(format!(
                "client {client_id} could only draw {} samples from classes {chosen:?}",
                taken.len()
            )));
        }

        let total = taken.len();
        let (n_train, _) = train_test_split(total);
        let mut mat = DenseMatrix::zeros(total, features.ncols());
        let mut lab = Vec::with_capacity(total);
        for (r, &idx) in taken.iter().enumerate() {
            mat.row_mut(r).copy_from_slice(features.row(idx));
            lab.push(labels[idx]);
        }
        let all = Batch::new(mat, lab)?;
        let train_idx: Vec<usize> = (0..n_train).collect();
        let test_idx: Vec<usize> = (n_train..total).collect();
        shards.push(ClientShard {
            client_id,
            train: all.select(&train_idx)?,
            test: all.select(&test_idx)?,
        });
    }
    FederatedDataset::new(shards, num_classes, features.ncols(), Provenance::Partitioned)
}
