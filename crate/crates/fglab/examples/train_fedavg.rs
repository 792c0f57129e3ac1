//! Smallest end-to-end run: FedAvg on the bundled digits surrogate.
//!
//! ```bash
//! cargo run --release -p fglab --example train_fedavg
//! ```

use fglab::datagen::{digits_pool, partition_noniid};
use fglab::flcore::{run_fedavg, FedAvgOptions, TrainParams};
use fglab::models::ModelSpec;
use fglab::numkit::RngStream;

fn main() -> Result<(), fglab::Error> {
    let seed = 42;
    let (features, labels) = digits_pool(8_000, &mut RngStream::new(seed, 0));
    let dataset = partition_noniid(&features, &labels, 100, 3, &mut RngStream::new(seed, 1))?;
    println!(
        "dataset: {} clients, {} train / {} test samples, 3 classes per client",
        dataset.n_clients(),
        dataset.total_train(),
        dataset.total_test()
    );

    let spec = ModelSpec::mclr(64, 10);
    let run = run_fedavg(
        &dataset,
        &spec,
        &FedAvgOptions {
            rounds: 40,
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

    println!("round  accuracy  train-loss  discrepancy");
    for m in run.metrics.iter().step_by(4) {
        println!(
            "{:>5}  {:>8.4}  {:>10.4}  {:>11.4}",
            m.round, m.weighted_accuracy, m.mean_train_loss, m.discrepancy
        );
    }
    let best = run
        .metrics
        .iter()
        .map(|m| m.weighted_accuracy)
        .fold(0.0f64, f64::max);
    println!("max accuracy: {best:.4}");
    Ok(())
}
