//! Federated dataset construction.
//!
//! Three sources feed the trainers: the Synthetic(alpha, beta)
//! generator, a label-limited power-law partitioner over any labeled
//! pool, and IDX image ingestion. An 8x8 digit surrogate ships in-repo
//! so nothing here ever needs a download.

mod cache;
mod digits;
mod idx;
mod partition;
mod synthetic;

pub use cache::{load_jsonl, save_jsonl};
pub use digits::digits_pool;
pub use idx::load_idx;
pub use partition::partition_noniid;
pub use synthetic::generate_synthetic;

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::Batch;
use crate::numkit::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Partitioned,
    Ingested,
}

/// One client's local data: disjoint train and test batches.
#[derive(Debug, Clone)]
pub struct ClientShard {
    pub client_id: usize,
    pub train: Batch,
    pub test: Batch,
}

/// A complete federated dataset with dense client ids 0..n-1.
#[derive(Debug, Clone)]
pub struct FederatedDataset {
    pub shards: Vec<ClientShard>,
    pub num_classes: usize,
    pub input_dim: usize,
    pub provenance: Provenance,
}

impl FederatedDataset {
    pub fn new(
        shards: Vec<ClientShard>,
        num_classes: usize,
        input_dim: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::InvalidArgument("dataset without shards".into()));
        }
        for (i, s) in shards.iter().enumerate() {
            if s.client_id != i {
                return Err(Error::InvalidArgument(format!(
                    "client ids must be dense 0..n-1, shard {i} has id {}",
                    s.client_id
                )));
            }
            if s.train.feature_dim() != input_dim || s.test.feature_dim() != input_dim {
                return Err(Error::DimMismatch {
                    expected: input_dim,
                    got: s.train.feature_dim(),
                });
            }
        }
        Ok(FederatedDataset {
            shards,
            num_classes,
            input_dim,
            provenance,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, client_id: usize) -> &ClientShard {
        &self.shards[client_id]
    }

    pub fn total_train(&self) -> usize {
        self.shards.iter().map(|s| s.train.n()).sum()
    }

    pub fn total_test(&self) -> usize {
        self.shards.iter().map(|s| s.test.n()).sum()
    }
}

/// Heavy-tailed shard sizes: Lomax(1.5) draws mapped to [10, 1000] and,
/// when a finite pool is given, scaled down so the total fits it.
pub fn power_law_sizes(n_clients: usize, pool: Option<usize>, rng: &mut RngStream) -> Vec<usize> {
    let shape = 1.5;
    let mut sizes: Vec<usize> = (0..n_clients)
        .map(|_| {
            // Lomax(shape) = Pareto(1, shape) - 1 via inverse CDF.
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let lomax = (1.0 - u).powf(-1.0 / shape) - 1.0;
            (10.0 * (1.0 + lomax)).floor().clamp(10.0, 1000.0) as usize
        })
        .collect();
    if let Some(pool) = pool {
        let total: usize = sizes.iter().sum();
        if total > pool {
            let f = pool as f64 / total as f64;
            for s in sizes.iter_mut() {
                *s = ((*s as f64 * f).floor() as usize).max(2);
            }
            // max(2) can leave the total above the pool on tiny pools;
            // trim the largest shards until it fits.
            let mut total: usize = sizes.iter().sum();
            while total > pool {
                let imax = (0..sizes.len()).max_by_key(|&i| sizes[i]).unwrap();
                if sizes[imax] <= 2 {
                    break;
                }
                sizes[imax] -= 1;
                total -= 1;
            }
        }
    }
    sizes
}

/// 90/10 split of a shard size; both sides stay nonempty.
pub(crate) fn train_test_split(total: usize) -> (usize, usize) {
    debug_assert!(total >= 2);
    let test = ((total as f64 / 10.0).round() as usize).clamp(1, total - 1);
    (total - test, test)
}
