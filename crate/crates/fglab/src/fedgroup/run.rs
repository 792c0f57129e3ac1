//! Full training loops for the grouped frameworks.
//!
//! `run_fedgroup` drives cold start, per-round lazy newcomer
//! enrollment, intra-group training and inter-group aggregation.
//! `run_fesem` / `run_ifca` are minimal baseline loops that share this
//! crate's solvers and differ only in how clients pick a group each
//! round.
//!
//! Stream discipline matches the plain FedAvg loop (same "select" and
//! "client" labels), which is what makes the one-group, zero
//! inter-group-rate configuration reduce to FedAvg bit-exactly.

use std::collections::BTreeSet;

use rand_distr::{Distribution, Normal};

use super::{
    client_cold_start, cold_dissimilarity, group_cold_start, ifca_assign, inter_group_aggregation,
    intra_group_update, fesem_assign, weighted_accuracy, GroupState, GroupingConfig,
};
use crate::clustering::{edc, madc_matrix, similarity_matrix};
use crate::datagen::FederatedDataset;
use crate::error::{Error, Result};
use crate::flcore::{
    client_update, discrepancy, evaluate_on, fedavg_round, select_clients, ClientState, EvalSums,
    RoundMetrics, TrainParams,
};
use crate::models::{ModelParams, ModelSpec};
use crate::numkit::{ParamVector, RngStream, UpdateMatrix};

/// Scale of the random offsets that split the baseline group models
/// apart at initialization (FeSEM / IFCA need distinct centers).
const BASELINE_CENTER_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct FedGroupOptions {
    pub rounds: usize,
    pub clients_per_round: usize,
    pub tp: TrainParams,
    pub grouping: GroupingConfig,
    pub seed: u64,
}

/// Per-client enrollment record for the grouping audit file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AuditRecord {
    pub client_id: usize,
    pub group_id: usize,
    /// 0 for founders enrolled at cold start, otherwise the round of
    /// (last) assignment.
    pub assignment_round: usize,
    /// Normalized cosine dissimilarity to the group's founding
    /// direction (FedGroup), L2 distance (FeSEM) or loss (IFCA).
    pub assignment_dissimilarity: f64,
}

/// One EDC/MADC sample for the measure-comparison scatter.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SimilarityPair {
    pub client_i: usize,
    pub client_j: usize,
    pub edc: f64,
    pub madc: f64,
}

#[derive(Debug, Clone)]
pub struct GroupedRunResult {
    pub metrics: Vec<RoundMetrics>,
    /// Auxiliary global model (unweighted mean of group models) at the
    /// end of each round.
    pub trajectory: Vec<ParamVector>,
    pub final_global: ParamVector,
    pub groups: Vec<GroupState>,
    pub audit: Vec<AuditRecord>,
    /// Pairwise EDC vs MADC over the founders' pre-training updates;
    /// present when at least three clients pre-trained.
    pub similarity_pairs: Option<Vec<SimilarityPair>>,
}

/// Weighted accuracy / loss / discrepancy for one round of a grouped
/// framework. Accuracy and loss are over each group's roster with its
/// own model; discrepancy averages the participating groups'
/// client-vs-group distances, weighted by roster size. With a single
/// participating group the value is passed through untouched.
fn grouped_round_metrics(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    round: usize,
    selected: Vec<usize>,
    rosters: &[Vec<usize>],
    group_params: &[ParamVector],
    per_group_disc: &[Option<f64>],
) -> Result<RoundMetrics> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut loss_sum = 0.0;
    let mut train_size = 0usize;
    for (g, roster) in rosters.iter().enumerate() {
        if roster.is_empty() {
            continue;
        }
        let sums: EvalSums = evaluate_on(ds, spec, &group_params[g], roster)?;
        pairs.push((sums.test_size, sums.correct));
        loss_sum += sums.train_loss_sum;
        train_size += sums.train_size;
    }
    let mut disc_weighted = 0.0;
    let mut disc_weight = 0.0;
    let mut participating: Vec<(f64, f64)> = Vec::new();
    for (g, d) in per_group_disc.iter().enumerate() {
        if let Some(d) = d {
            participating.push((rosters[g].len() as f64, *d));
        }
    }
    let disc = if participating.len() == 1 {
        participating[0].1
    } else {
        for (w, d) in &participating {
            disc_weighted += w * d;
            disc_weight += w;
        }
        if disc_weight > 0.0 {
            disc_weighted / disc_weight
        } else {
            0.0
        }
    };
    Ok(RoundMetrics {
        round,
        weighted_accuracy: weighted_accuracy(&pairs)?,
        mean_train_loss: loss_sum / train_size as f64,
        discrepancy: disc,
        selected,
    })
}

/// T rounds of FedGroup (mu = 0) or FedGrouProx (mu > 0).
///
/// With a single group the framework degrades to FedAvg/FedProx: no
/// pre-training, the group starts at the initial model and every client
/// is a member from round one.
pub fn run_fedgroup(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    opts: &FedGroupOptions,
) -> Result<GroupedRunResult> {
    let base = RngStream::root(opts.seed);
    let n = ds.n_clients();
    let m = opts.grouping.num_groups;
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one group".into()));
    }
    if opts.clients_per_round == 0 || opts.clients_per_round > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {} of {n} clients",
            opts.clients_per_round
        )));
    }
    let w0 = ModelParams::init(*spec, &mut base.derive("init", &[])).into_flat();

    let mut audit: Vec<AuditRecord> = Vec::new();
    let mut similarity_pairs = None;
    let mut groups: Vec<GroupState>;
    let mut clients: Vec<ClientState> = (0..n)
        .map(|client_id| ClientState {
            client_id,
            last_update: None,
            group_id: None,
        })
        .collect();

    if m == 1 {
        let members: BTreeSet<usize> = (0..n).collect();
        for (id, state) in clients.iter_mut().enumerate() {
            state.group_id = Some(0);
            audit.push(AuditRecord {
                client_id: id,
                group_id: 0,
                assignment_round: 0,
                assignment_dissimilarity: 0.0,
            });
        }
        groups = vec![GroupState {
            group_id: 0,
            params: w0.clone(),
            cold_direction: ParamVector::zeros(w0.dim()),
            members,
        }];
    } else {
        let cold = group_cold_start(ds, spec, &w0, &opts.grouping, &opts.tp, &base)?;
        groups = cold.groups;
        for (id, update) in &cold.pretrained {
            clients[*id].last_update = Some(update.clone());
        }
        for g in &groups {
            for &id in &g.members {
                clients[id].group_id = Some(g.group_id);
                let update = clients[id].last_update.as_ref().expect("member pre-trained");
                audit.push(AuditRecord {
                    client_id: id,
                    group_id: g.group_id,
                    assignment_round: 0,
                    assignment_dissimilarity: cold_dissimilarity(update, &g.cold_direction)?,
                });
            }
        }
        if cold.pretrained.len() >= 3 {
            similarity_pairs = Some(measure_scatter(&cold.pretrained, m)?);
        }
    }

    let mut metrics = Vec::with_capacity(opts.rounds);
    let mut trajectory = Vec::with_capacity(opts.rounds);
    for round in 1..=opts.rounds {
        let selected = select_clients(round, opts.clients_per_round, n, &base)?;

        // Lazy client cold start, in ascending id order.
        for &id in &selected {
            if clients[id].group_id.is_some() {
                continue;
            }
            let mut pre_rng = base.derive("pretrain", &[id as u64]);
            let update = client_update(ds.shard(id), spec, &w0, &opts.tp, &mut pre_rng)?;
            let mut rac_rng = base.derive("rac", &[round as u64, id as u64]);
            let assignment =
                client_cold_start(&update, &groups, opts.grouping.ablation, &mut rac_rng)?;
            groups[assignment.group_id].members.insert(id);
            clients[id].group_id = Some(assignment.group_id);
            clients[id].last_update = Some(update);
            audit.push(AuditRecord {
                client_id: id,
                group_id: assignment.group_id,
                assignment_round: round,
                assignment_dissimilarity: assignment.dissimilarity,
            });
        }

        // Intra-group training over the selected members of each group.
        // Discrepancy reads against the group model the round started
        // from.
        let mut snapshot = Vec::with_capacity(m);
        let mut per_group_disc: Vec<Option<f64>> = vec![None; m];
        for g in 0..m {
            let sel_g: Vec<usize> = selected
                .iter()
                .copied()
                .filter(|id| groups[g].members.contains(id))
                .collect();
            let outcome =
                intra_group_update(ds, spec, &groups[g], &sel_g, &opts.tp, round, &base)?;
            if !outcome.client_models.is_empty() {
                let locals: Vec<ParamVector> =
                    outcome.client_models.into_iter().map(|(_, w)| w).collect();
                per_group_disc[g] = Some(discrepancy(&locals, &groups[g].params)?);
            }
            snapshot.push(outcome.new_global);
        }

        let aggregated = inter_group_aggregation(&snapshot, opts.grouping.eta_g)?;
        for (g, params) in aggregated.into_iter().enumerate() {
            groups[g].params = params;
        }

        let group_params: Vec<ParamVector> = groups.iter().map(|g| g.params.clone()).collect();
        let global = ParamVector::mean_of(&group_params)?;
        let rosters: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.members.iter().copied().collect())
            .collect();
        metrics.push(grouped_round_metrics(
            ds,
            spec,
            round,
            selected,
            &rosters,
            &group_params,
            &per_group_disc,
        )?);
        trajectory.push(global);
    }

    audit.sort_by_key(|r| r.client_id);
    let final_global = trajectory
        .last()
        .cloned()
        .unwrap_or_else(|| w0.clone());
    Ok(GroupedRunResult {
        metrics,
        trajectory,
        final_global,
        groups,
        audit,
        similarity_pairs,
    })
}

fn measure_scatter(
    pretrained: &[(usize, ParamVector)],
    m: usize,
) -> Result<Vec<SimilarityPair>> {
    let updates = UpdateMatrix::new(pretrained.iter().map(|(_, d)| d.clone()).collect())?;
    let rank = m.min(updates.n()).min(updates.dim()).max(1);
    let embedding = edc(&updates, rank)?;
    let madc = madc_matrix(&similarity_matrix(&updates)?)?;
    let n = updates.n();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(SimilarityPair {
                client_i: pretrained[i].0,
                client_j: pretrained[j].0,
                edc: embedding.pairwise.get(i, j),
                madc: madc.get(i, j),
            });
        }
    }
    Ok(pairs)
}

/// Which rule a baseline uses to (re)assign a selected client.
enum BaselineRule {
    FeSem,
    Ifca,
}

fn run_baseline(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    opts: &FedGroupOptions,
    rule: BaselineRule,
) -> Result<GroupedRunResult> {
    let base = RngStream::root(opts.seed);
    let n = ds.n_clients();
    let m = opts.grouping.num_groups;
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one group".into()));
    }
    let w0 = ModelParams::init(*spec, &mut base.derive("init", &[])).into_flat();

    // Distinct starting centers: w0 plus a small random offset per group.
    let noise = Normal::new(0.0, BASELINE_CENTER_STD).expect("fixed std");
    let tag = match rule {
        BaselineRule::FeSem => "fesem_init",
        BaselineRule::Ifca => "ifca_init",
    };
    let mut groups: Vec<GroupState> = (0..m)
        .map(|g| {
            let mut rng = base.derive(tag, &[g as u64]);
            let mut params = w0.clone();
            for v in params.as_mut_slice() {
                *v += noise.sample(&mut rng);
            }
            GroupState {
                group_id: g,
                params,
                cold_direction: ParamVector::zeros(w0.dim()),
                members: BTreeSet::new(),
            }
        })
        .collect();

    let mut local_models: Vec<Option<ParamVector>> = vec![None; n];
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut latest: Vec<Option<AuditRecord>> = vec![None; n];

    let mut metrics = Vec::with_capacity(opts.rounds);
    let mut trajectory = Vec::with_capacity(opts.rounds);
    for round in 1..=opts.rounds {
        let selected = select_clients(round, opts.clients_per_round, n, &base)?;
        let group_params: Vec<ParamVector> = groups.iter().map(|g| g.params.clone()).collect();

        // Every selected client re-picks its group from this round's
        // broadcast models.
        for &id in &selected {
            let (g, score) = match rule {
                BaselineRule::FeSem => {
                    let reference = local_models[id].as_ref().unwrap_or(&w0);
                    let g = fesem_assign(reference, &group_params);
                    (g, reference.distance(&group_params[g]))
                }
                BaselineRule::Ifca => {
                    let g = ifca_assign(ds, spec, id, &group_params)?;
                    let params = ModelParams::from_flat(*spec, group_params[g].clone())?;
                    (g, crate::models::loss(&params, &ds.shard(id).train)?)
                }
            };
            if let Some(old) = assignment[id] {
                groups[old].members.remove(&id);
            }
            assignment[id] = Some(g);
            groups[g].members.insert(id);
            latest[id] = Some(AuditRecord {
                client_id: id,
                group_id: g,
                assignment_round: round,
                assignment_dissimilarity: score,
            });
        }

        let mut per_group_disc: Vec<Option<f64>> = vec![None; m];
        for g in 0..m {
            let sel_g: Vec<usize> = selected
                .iter()
                .copied()
                .filter(|id| assignment[*id] == Some(g))
                .collect();
            if sel_g.is_empty() {
                continue;
            }
            let outcome = fedavg_round(ds, spec, &groups[g].params, &sel_g, &opts.tp, round, &base)?;
            let locals: Vec<ParamVector> =
                outcome.client_models.iter().map(|(_, w)| w.clone()).collect();
            per_group_disc[g] = Some(discrepancy(&locals, &groups[g].params)?);
            groups[g].params = outcome.new_global;
            for (id, w) in outcome.client_models {
                local_models[id] = Some(w);
            }
        }

        let group_params: Vec<ParamVector> = groups.iter().map(|g| g.params.clone()).collect();
        let global = ParamVector::mean_of(&group_params)?;
        let rosters: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.members.iter().copied().collect())
            .collect();
        metrics.push(grouped_round_metrics(
            ds,
            spec,
            round,
            selected,
            &rosters,
            &group_params,
            &per_group_disc,
        )?);
        trajectory.push(global);
    }

    let final_global = trajectory.last().cloned().unwrap_or(w0);
    Ok(GroupedRunResult {
        metrics,
        trajectory,
        final_global,
        groups,
        audit: latest.into_iter().flatten().collect(),
        similarity_pairs: None,
    })
}

/// FeSEM baseline: per-round L2 re-assignment of the selected clients.
pub fn run_fesem(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    opts: &FedGroupOptions,
) -> Result<GroupedRunResult> {
    run_baseline(ds, spec, opts, BaselineRule::FeSem)
}

/// IFCA baseline: per-round loss-minimizing re-assignment; every group
/// model is broadcast to every selected client each round.
pub fn run_ifca(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    opts: &FedGroupOptions,
) -> Result<GroupedRunResult> {
    run_baseline(ds, spec, opts, BaselineRule::Ifca)
}
