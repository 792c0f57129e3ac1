//! How label skew hurts federated training: the same FedAvg setup run
//! with 1, 5 and 10 classes per client. Stronger skew means larger and
//! jumpier client/global discrepancy and a lower accuracy ceiling.
//!
//! ```bash
//! cargo run --release -p fglab --example heterogeneity_motivation
//! ```

use fglab::datagen::{digits_pool, partition_noniid};
use fglab::flcore::{run_fedavg, FedAvgOptions, TrainParams};
use fglab::models::ModelSpec;
use fglab::numkit::{self, RngStream};

fn main() -> Result<(), fglab::Error> {
    let seed = 7;
    let spec = ModelSpec::mclr(64, 10);
    println!("classes/client  max-acc  disc-mean  disc-variance");
    for classes_per_client in [1usize, 5, 10] {
        let (features, labels) = digits_pool(8_000, &mut RngStream::new(seed, 0));
        let dataset = partition_noniid(
            &features,
            &labels,
            100,
            classes_per_client,
            &mut RngStream::new(seed, 1),
        )?;
        let run = run_fedavg(
            &dataset,
            &spec,
            &FedAvgOptions {
                rounds: 60,
                clients_per_round: 10,
                tp: TrainParams {
                    local_epochs: 20,
                    batch_size: 10,
                    eta: 0.03,
                    mu: 0.0,
                },
                seed,
            },
        )?;
        let max_acc = run
            .metrics
            .iter()
            .map(|m| m.weighted_accuracy)
            .fold(0.0f64, f64::max);
        // settled phase: second half of the run
        let tail: Vec<f64> = run
            .metrics
            .iter()
            .skip(run.metrics.len() / 2)
            .map(|m| m.discrepancy)
            .collect();
        println!(
            "{:>14}  {:>7.4}  {:>9.4}  {:>13.6}",
            classes_per_client,
            max_acc,
            numkit::mean(&tail),
            numkit::variance(&tail)
        );
    }
    Ok(())
}
