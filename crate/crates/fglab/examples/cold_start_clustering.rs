//! Group cold start on a planted task: two client populations holding
//! disjoint digit pairs. Founders pre-train from the shared initial
//! model; their update directions are clustered with EDC (decomposed
//! cosine + K-Means++) and with MADC (full cosine profiles + complete
//! linkage); a held-out newcomer is then routed by client cold start.
//!
//! ```bash
//! cargo run --release -p fglab --example cold_start_clustering
//! ```

use fglab::datagen::{digits_pool, partition_noniid, FederatedDataset, Provenance};
use fglab::fedgroup::{client_cold_start, group_cold_start, Ablation, GroupingConfig, Measure};
use fglab::flcore::{client_update, TrainParams};
use fglab::models::ModelSpec;
use fglab::numkit::{DenseMatrix, ParamVector, RngStream};

fn planted(n_clients: usize, seed: u64) -> Result<FederatedDataset, fglab::Error> {
    let (f, l) = digits_pool(4_000, &mut RngStream::new(seed, 0));
    let take = |pair: [usize; 2]| {
        let rows: Vec<usize> = (0..l.len()).filter(|&i| pair.contains(&l[i])).collect();
        let mut mat = DenseMatrix::zeros(rows.len(), 64);
        let mut labs = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            mat.row_mut(r).copy_from_slice(f.row(i));
            labs.push(l[i]);
        }
        (mat, labs)
    };
    let (fa, la) = take([0, 1]);
    let (fb, lb) = take([6, 7]);
    let half = n_clients / 2;
    let a = partition_noniid(&fa, &la, half, 2, &mut RngStream::new(seed, 1))?;
    let b = partition_noniid(&fb, &lb, n_clients - half, 2, &mut RngStream::new(seed, 2))?;
    let mut shards = a.shards;
    for mut s in b.shards {
        s.client_id += half;
        shards.push(s);
    }
    FederatedDataset::new(shards, 10, 64, Provenance::Partitioned)
}

fn main() -> Result<(), fglab::Error> {
    let ds = planted(20, 3)?;
    let spec = ModelSpec::mclr(64, 10);
    let w0 = ParamVector::zeros(spec.parameter_count());
    let tp = TrainParams {
        local_epochs: 10,
        batch_size: 10,
        eta: 0.03,
        mu: 0.0,
    };
    println!("clients 0-9 hold digits {{0,1}}, clients 10-19 hold {{6,7}}\n");

    for measure in [Measure::Edc, Measure::Madc] {
        let cold = group_cold_start(
            &ds,
            &spec,
            &w0,
            &GroupingConfig {
                num_groups: 2,
                pretrain_scale: 8, // 16 founders, 4 clients stay cold
                measure,
                eta_g: 0.0,
                ablation: Ablation::None,
            },
            &tp,
            &RngStream::root(11),
        )?;
        println!("{measure:?} groups:");
        for g in &cold.groups {
            println!(
                "  group {}: members {:?} (direction norm {:.3})",
                g.group_id,
                g.members,
                g.cold_direction.norm()
            );
        }

        // Route one still-cold client through client cold start.
        let newcomer = (0..20)
            .find(|id| cold.groups.iter().all(|g| !g.members.contains(id)))
            .expect("someone stayed cold");
        let update = client_update(
            ds.shard(newcomer),
            &spec,
            &w0,
            &tp,
            &mut RngStream::root(11).derive("pretrain", &[newcomer as u64]),
        )?;
        let assignment =
            client_cold_start(&update, &cold.groups, Ablation::None, &mut RngStream::root(1))?;
        println!(
            "  newcomer {} -> group {} (dissimilarity {:.4})\n",
            newcomer, assignment.group_id, assignment.dissimilarity
        );
    }
    Ok(())
}
