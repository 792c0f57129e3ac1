//! The Synthetic(alpha, beta) federated data generator.
//!
//! Per client k: a scalar u_k ~ N(0, alpha) seeds the client's own
//! softmax model (W_k, b_k with entries ~ N(u_k, 1)); a scalar
//! B_k ~ N(0, beta) seeds the feature mean v_k (entries ~ N(B_k, 1));
//! features are drawn ~ N(v_k, Sigma) with the fixed diagonal
//! Sigma_jj = j^-1.2, and labels are the argmax of W_k x + b_k. alpha
//! controls how much local models differ, beta how much local feature
//! distributions differ. Shard sizes follow the crate-wide power law
//! and each shard is split 90/10 into train and test.

use rand_distr::{Distribution, Normal};

use super::{power_law_sizes, train_test_split, ClientShard, FederatedDataset, Provenance};
use crate::error::{Error, Result};
use crate::models::Batch;
use crate::numkit::{DenseMatrix, RngStream};

pub const SYNTHETIC_INPUT_DIM: usize = 60;
pub const SYNTHETIC_NUM_CLASSES: usize = 10;

pub fn generate_synthetic(
    alpha: f64,
    beta: f64,
    n_clients: usize,
    rng: &mut RngStream,
) -> Result<FederatedDataset> {
    if alpha < 0.0 || beta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic spread parameters must be nonnegative, got alpha={alpha}, beta={beta}"
        )));
    }
    if n_clients == 0 {
        return Err(Error::InvalidArgument("need at least one client".into()));
    }
    let d = SYNTHETIC_INPUT_DIM;
    let c = SYNTHETIC_NUM_CLASSES;
    let model_spread = Normal::new(0.0, alpha).expect("validated");
    let mean_spread = Normal::new(0.0, beta).expect("validated");
    let unit = Normal::new(0.0, 1.0).expect("fixed");
    let feature_std: Vec<f64> = (1..=d).map(|j| (j as f64).powf(-1.2).sqrt()).collect();

    let sizes = power_law_sizes(n_clients, None, rng);
    let mut shards = Vec::with_capacity(n_clients);
    for (client_id, &size) in sizes.iter().enumerate() {
        let u_k: f64 = model_spread.sample(rng);
        let b_k: f64 = mean_spread.sample(rng);
        let w: Vec<f64> = (0..d * c).map(|_| u_k + unit.sample(rng)).collect();
        let bias: Vec<f64> = (0..c).map(|_| u_k + unit.sample(rng)).collect();
        let v: Vec<f64> = (0..d).map(|_| b_k + unit.sample(rng)).collect();

        let mut features = DenseMatrix::zeros(size, d);
        let mut labels = Vec::with_capacity(size);
        for i in 0..size {
            let row = features.row_mut(i);
            for j in 0..d {
                row[j] = v[j] + feature_std[j] * unit.sample(rng);
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for cls in 0..c {
                let mut z = bias[cls];
                for j in 0..d {
                    z += row[j] * w[j * c + cls];
                }
                if z > best {
                    best = z;
                    arg = cls;
                }
            }
            labels.push(arg);
        }

        let (n_train, _n_test) = train_test_split(size);
        let train_idx: Vec<usize> = (0..n_train).collect();
        let test_idx: Vec<usize> = (n_train..size).collect();
        let all = Batch::new(features, labels)?;
        shards.push(ClientShard {
            client_id,
            train: all.select(&train_idx)?,
            test: all.select(&test_idx)?,
        });
    }
    FederatedDataset::new(shards, c, d, Provenance::Synthetic)
}
