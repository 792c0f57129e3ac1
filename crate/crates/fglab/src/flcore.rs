//! The vanilla federated learning engine: local (proximal) SGD, client
//! sampling, FedAvg rounds, and the round metrics every framework
//! reports.
//!
//! Determinism contract: every random decision draws from a stream
//! derived as `(seed, stage tag, round, client id)`, so client updates
//! can run on any number of workers and still reproduce bit-identically.
//! Aggregation always walks clients in ascending id order.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::datagen::{ClientShard, FederatedDataset};
use crate::error::{Error, Result};
use crate::models::{self, ModelParams, ModelSpec};
use crate::numkit::{ParamVector, RngStream};

/// CSV schema shared by every framework's metrics file.
pub const METRICS_HEADER: &str =
    "round,framework,weighted_accuracy,mean_train_loss,discrepancy,num_selected";

/// Local solver hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    /// Local epochs E.
    pub local_epochs: usize,
    /// Mini-batch size B (clamped to the shard size per client).
    pub batch_size: usize,
    /// Local learning rate.
    pub eta: f64,
    /// Proximal weight; 0 recovers plain SGD.
    pub mu: f64,
}

/// Per-client bookkeeping used by the grouped frameworks.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub last_update: Option<ParamVector>,
    pub group_id: Option<usize>,
}

/// One row of the metrics CSV.
#[derive(Debug, Clone)]
pub struct RoundMetrics {
    pub round: usize,
    pub weighted_accuracy: f64,
    pub mean_train_loss: f64,
    pub discrepancy: f64,
    pub selected: Vec<usize>,
}

impl RoundMetrics {
    pub fn csv_row(&self, framework: &str) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.round,
            framework,
            self.weighted_accuracy,
            self.mean_train_loss,
            self.discrepancy,
            self.selected.len()
        )
    }
}

/// Run E epochs of mini-batch proximal SGD on one shard and return the
/// parameter update `delta = w_final - w_start`.
///
/// Batches are reshuffled each epoch from `rng`; a short trailing batch
/// is kept. The proximal anchor stays at the round's starting point.
pub fn client_update(
    shard: &ClientShard,
    spec: &ModelSpec,
    w_start: &ParamVector,
    tp: &TrainParams,
    rng: &mut RngStream,
) -> Result<ParamVector> {
    if shard.train.n() == 0 {
        return Err(Error::InvalidArgument(format!(
            "client {} has an empty train set",
            shard.client_id
        )));
    }
    if tp.local_epochs == 0 || tp.batch_size == 0 || tp.eta <= 0.0 || tp.mu < 0.0 {
        return Err(Error::InvalidArgument(
            "need local_epochs >= 1, batch_size >= 1, eta > 0, mu >= 0".into(),
        ));
    }
    let n = shard.train.n();
    let b = tp.batch_size.min(n);
    let mut params = ModelParams::from_flat(*spec, w_start.clone())?;
    let mut order: Vec<usize> = (0..n).collect();
    for _epoch in 0..tp.local_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(b) {
            let batch = shard.train.select(chunk)?;
            let grad = models::prox_gradient(&params, &batch, w_start, tp.mu)?;
            params.flat_mut().add_scaled(-tp.eta, &grad);
        }
    }
    let delta = params.into_flat().sub(w_start);
    if !delta.is_finite() {
        return Err(Error::NonFinite {
            context: "client update",
        });
    }
    Ok(delta)
}

/// Uniform sample of `k` client ids without replacement, deterministic
/// per (seed, round). Returned sorted ascending.
pub fn select_clients(round: usize, k: usize, n: usize, base: &RngStream) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {n} clients"
        )));
    }
    let mut rng = base.derive("select", &[round as u64]);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.random_range(0..n - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Outcome of one aggregation round over a set of clients.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub new_global: ParamVector,
    /// Post-update local models (start + delta) in ascending client id
    /// order, for discrepancy measurement.
    pub client_models: Vec<(usize, ParamVector)>,
}

/// One FedAvg/FedProx round: local updates on the selected clients from
/// `global_w`, aggregated with weights n_i / n.
pub fn fedavg_round(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    global_w: &ParamVector,
    selected: &[usize],
    tp: &TrainParams,
    round: usize,
    base: &RngStream,
) -> Result<RoundOutcome> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("empty client selection".into()));
    }
    let mut ids = selected.to_vec();
    ids.sort_unstable();
    let deltas: Vec<(usize, ParamVector)> = ids
        .par_iter()
        .map(|&id| {
            let mut rng = base.derive("client", &[round as u64, id as u64]);
            client_update(ds.shard(id), spec, global_w, tp, &mut rng).map(|d| (id, d))
        })
        .collect::<Result<_>>()?;

    let total: usize = ids.iter().map(|&id| ds.shard(id).train.n()).sum();
    let mut new_global = global_w.clone();
    let mut client_models = Vec::with_capacity(deltas.len());
    let mut weight_sum = 0.0;
    for (id, delta) in &deltas {
        let weight = ds.shard(*id).train.n() as f64 / total as f64;
        weight_sum += weight;
        new_global.add_scaled(weight, delta);
        client_models.push((*id, global_w.add(delta)));
    }
    debug_assert!((weight_sum - 1.0).abs() < 1e-12, "weights sum to {weight_sum}");
    Ok(RoundOutcome {
        new_global,
        client_models,
    })
}

/// Mean L2 distance between each client model and a reference model.
pub fn discrepancy(client_ws: &[ParamVector], w_ref: &ParamVector) -> Result<f64> {
    if client_ws.is_empty() {
        return Err(Error::InvalidArgument(
            "discrepancy over an empty set".into(),
        ));
    }
    let mut total = 0.0;
    for w in client_ws {
        if w.dim() != w_ref.dim() {
            return Err(Error::DimMismatch {
                expected: w_ref.dim(),
                got: w.dim(),
            });
        }
        total += w.distance(w_ref);
    }
    Ok(total / client_ws.len() as f64)
}

/// Test-correctness and train-loss sums of one model over a client
/// roster, accumulated in ascending id order.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSums {
    pub correct: usize,
    pub test_size: usize,
    /// Sum over clients of n_i * mean train loss.
    pub train_loss_sum: f64,
    pub train_size: usize,
}

pub(crate) fn evaluate_on(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    w: &ParamVector,
    roster: &[usize],
) -> Result<EvalSums> {
    let params = ModelParams::from_flat(*spec, w.clone())?;
    let mut sums = EvalSums::default();
    let per_client: Vec<(usize, usize, f64, usize)> = roster
        .par_iter()
        .map(|&id| {
            let shard = ds.shard(id);
            let correct = models::correct_count(&params, &shard.test)?;
            let loss = models::loss(&params, &shard.train)?;
            Ok((correct, shard.test.n(), loss, shard.train.n()))
        })
        .collect::<Result<_>>()?;
    for (correct, test_n, loss, train_n) in per_client {
        sums.correct += correct;
        sums.test_size += test_n;
        sums.train_loss_sum += loss * train_n as f64;
        sums.train_size += train_n;
    }
    Ok(sums)
}

/// Options for a plain FedAvg/FedProx run.
#[derive(Debug, Clone, Copy)]
pub struct FedAvgOptions {
    pub rounds: usize,
    pub clients_per_round: usize,
    pub tp: TrainParams,
    pub seed: u64,
}

/// Result of a full training run, shared by all frameworks.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<RoundMetrics>,
    /// Global model at the end of each round.
    pub trajectory: Vec<ParamVector>,
    pub final_global: ParamVector,
}

/// T rounds of FedAvg (mu = 0) or FedProx (mu > 0) over the dataset.
///
/// The global model starts from the deterministic initializer; metrics
/// evaluate it on every client each round; discrepancy compares the
/// selected clients' local models against the round's starting point.
pub fn run_fedavg(ds: &FederatedDataset, spec: &ModelSpec, opts: &FedAvgOptions) -> Result<RunResult> {
    let base = RngStream::root(opts.seed);
    let n = ds.n_clients();
    let mut global = ModelParams::init(*spec, &mut base.derive("init", &[])).into_flat();
    let roster: Vec<usize> = (0..n).collect();
    let mut metrics = Vec::with_capacity(opts.rounds);
    let mut trajectory = Vec::with_capacity(opts.rounds);
    for round in 1..=opts.rounds {
        let selected = select_clients(round, opts.clients_per_round, n, &base)?;
        let outcome = fedavg_round(ds, spec, &global, &selected, &opts.tp, round, &base)?;
        let locals: Vec<ParamVector> =
            outcome.client_models.iter().map(|(_, w)| w.clone()).collect();
        // discrepancy reads against the model the round started from
        let disc = discrepancy(&locals, &global)?;
        global = outcome.new_global;
        let sums = evaluate_on(ds, spec, &global, &roster)?;
        metrics.push(RoundMetrics {
            round,
            weighted_accuracy: sums.correct as f64 / sums.test_size as f64,
            mean_train_loss: sums.train_loss_sum / sums.train_size as f64,
            discrepancy: disc,
            selected,
        });
        trajectory.push(global.clone());
    }
    Ok(RunResult {
        metrics,
        trajectory,
        final_global: global,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{digits_pool, partition_noniid, generate_synthetic};
    use crate::models::gradient;

    fn small_dataset(seed: u64) -> FederatedDataset {
        let (f, l) = digits_pool(600, &mut RngStream::new(seed, 0));
        partition_noniid(&f, &l, 10, 3, &mut RngStream::new(seed, 1)).unwrap()
    }

    #[test]
    fn single_full_batch_step_is_one_gradient_step() {
        let ds = small_dataset(1);
        let spec = ModelSpec::mclr(64, 10);
        let shard = ds.shard(0);
        let w = ParamVector::zeros(spec.parameter_count());
        let tp = TrainParams {
            local_epochs: 1,
            batch_size: shard.train.n(),
            eta: 0.25,
            mu: 0.0,
        };
        let delta =
            client_update(shard, &spec, &w, &tp, &mut RngStream::new(2, 3)).unwrap();
        let p = ModelParams::from_flat(spec, w.clone()).unwrap();
        let g = gradient(&p, &shard.train).unwrap();
        let mut expected = ParamVector::zeros(spec.parameter_count());
        expected.add_scaled(-0.25, &g);
        for (d, e) in delta.as_slice().iter().zip(expected.as_slice()) {
            assert!((d - e).abs() < 1e-15);
        }
    }

    #[test]
    fn proximal_term_shrinks_updates() {
        let ds = small_dataset(2);
        let spec = ModelSpec::mclr(64, 10);
        let shard = ds.shard(1);
        let w = ParamVector::zeros(spec.parameter_count());
        let norm_for = |mu: f64| {
            let tp = TrainParams {
                local_epochs: 5,
                batch_size: shard.train.n(),
                eta: 0.1,
                mu,
            };
            client_update(shard, &spec, &w, &tp, &mut RngStream::new(5, 5))
                .unwrap()
                .norm()
        };
        let n0 = norm_for(0.0);
        let n1 = norm_for(1.0);
        let n2 = norm_for(5.0);
        assert!(n0 > n1 && n1 > n2, "{n0} > {n1} > {n2} expected");
    }

    #[test]
    fn client_update_is_deterministic() {
        let ds = small_dataset(3);
        let spec = ModelSpec::mclr(64, 10);
        let w = ParamVector::zeros(spec.parameter_count());
        let tp = TrainParams {
            local_epochs: 3,
            batch_size: 4,
            eta: 0.05,
            mu: 0.1,
        };
        let a = client_update(ds.shard(2), &spec, &w, &tp, &mut RngStream::new(7, 9)).unwrap();
        let b = client_update(ds.shard(2), &spec, &w, &tp, &mut RngStream::new(7, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn select_all_clients_when_k_equals_n() {
        let base = RngStream::root(1);
        let s = select_clients(4, 10, 10, &base).unwrap();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn selection_is_uniform_over_many_rounds() {
        let base = RngStream::root(123);
        let mut counts = [0usize; 10];
        for round in 0..10_000 {
            for id in select_clients(round, 2, 10, &base).unwrap() {
                counts[id] += 1;
            }
        }
        for (id, &c) in counts.iter().enumerate() {
            assert!(
                (c as i64 - 2000).abs() <= 150,
                "client {id} selected {c} times"
            );
        }
    }

    #[test]
    fn selection_rejects_oversized_k() {
        let base = RngStream::root(1);
        assert!(select_clients(0, 11, 10, &base).is_err());
    }

    #[test]
    fn single_client_round_applies_its_update() {
        let ds = small_dataset(4);
        let spec = ModelSpec::mclr(64, 10);
        let w = ParamVector::zeros(spec.parameter_count());
        let tp = TrainParams {
            local_epochs: 2,
            batch_size: 8,
            eta: 0.05,
            mu: 0.0,
        };
        let base = RngStream::root(77);
        let outcome = fedavg_round(&ds, &spec, &w, &[3], &tp, 1, &base).unwrap();
        let mut rng = base.derive("client", &[1, 3]);
        let delta = client_update(ds.shard(3), &spec, &w, &tp, &mut rng).unwrap();
        assert_eq!(outcome.new_global, w.add(&delta));
    }

    #[test]
    fn aggregation_weights_follow_train_sizes() {
        // Two clients with train sizes 1 and 3: weights 0.25 / 0.75.
        let (f, l) = digits_pool(40, &mut RngStream::new(9, 0));
        let mut ds = partition_noniid(&f, &l, 2, 10, &mut RngStream::new(9, 1)).unwrap();
        // shrink shards to exact sizes 1+1 and 3+1
        let s0 = &ds.shards[0];
        let t0 = s0.train.select(&[0]).unwrap();
        let s1 = &ds.shards[1];
        let t1 = s1.train.select(&[0, 1, 2]).unwrap();
        ds.shards[0].train = t0;
        ds.shards[1].train = t1;

        let spec = ModelSpec::mclr(64, 10);
        let w = ParamVector::zeros(spec.parameter_count());
        let tp = TrainParams {
            local_epochs: 1,
            batch_size: 100,
            eta: 0.1,
            mu: 0.0,
        };
        let base = RngStream::root(11);
        let outcome = fedavg_round(&ds, &spec, &w, &[0, 1], &tp, 2, &base).unwrap();
        let d0 = client_update(
            ds.shard(0),
            &spec,
            &w,
            &tp,
            &mut base.derive("client", &[2, 0]),
        )
        .unwrap();
        let d1 = client_update(
            ds.shard(1),
            &spec,
            &w,
            &tp,
            &mut base.derive("client", &[2, 1]),
        )
        .unwrap();
        let mut expected = w.clone();
        expected.add_scaled(0.25, &d0);
        expected.add_scaled(0.75, &d1);
        for (a, b) in outcome.new_global.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn discrepancy_hand_cases() {
        let w_ref = ParamVector::zeros(2);
        let same = vec![w_ref.clone(), w_ref.clone()];
        assert_eq!(discrepancy(&same, &w_ref).unwrap(), 0.0);
        let two = vec![
            ParamVector::from_vec(vec![1.0, 0.0]),
            ParamVector::from_vec(vec![0.0, 3.0]),
        ];
        assert_eq!(discrepancy(&two, &w_ref).unwrap(), 2.0);
    }

    #[test]
    fn discrepancy_is_translation_invariant() {
        let mut rng = RngStream::new(31, 0);
        let ws: Vec<ParamVector> = (0..4)
            .map(|_| ParamVector::from_vec((0..6).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let w_ref = ParamVector::from_vec((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
        let shift = ParamVector::from_vec(vec![0.7; 6]);
        let shifted: Vec<ParamVector> = ws.iter().map(|w| w.add(&shift)).collect();
        let a = discrepancy(&ws, &w_ref).unwrap();
        let b = discrepancy(&shifted, &w_ref.add(&shift)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tiny_mu_stays_close_to_fedavg() {
        let ds = small_dataset(6);
        let spec = ModelSpec::mclr(64, 10);
        let mk = |mu: f64| FedAvgOptions {
            rounds: 5,
            clients_per_round: 4,
            tp: TrainParams {
                local_epochs: 2,
                batch_size: 10,
                eta: 0.03,
                mu,
            },
            seed: 2024,
        };
        let a = run_fedavg(&ds, &spec, &mk(0.0)).unwrap();
        let b = run_fedavg(&ds, &spec, &mk(1e-9)).unwrap();
        let gap = a.final_global.distance(&b.final_global);
        assert!(gap < 1e-6, "mu continuity gap {gap}");
    }

    #[test]
    fn run_is_reproducible() {
        let ds = generate_synthetic(1.0, 1.0, 12, &mut RngStream::new(1, 0)).unwrap();
        let spec = ModelSpec::mclr(60, 10);
        let opts = FedAvgOptions {
            rounds: 4,
            clients_per_round: 5,
            tp: TrainParams {
                local_epochs: 2,
                batch_size: 10,
                eta: 0.01,
                mu: 0.0,
            },
            seed: 5,
        };
        let a = run_fedavg(&ds, &spec, &opts).unwrap();
        let b = run_fedavg(&ds, &spec, &opts).unwrap();
        assert_eq!(a.final_global, b.final_global);
        for (ra, rb) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(ra.csv_row("x"), rb.csv_row("x"));
        }
    }
}
