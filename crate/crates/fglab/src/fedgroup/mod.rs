//! Grouped federated training: group cold start, client cold start,
//! intra/inter-group aggregation, the ablation switches, and the
//! assignment rules of the FeSEM and IFCA baselines.

mod run;

pub use run::{
    run_fedgroup, run_ifca, run_fesem, AuditRecord, FedGroupOptions, GroupedRunResult,
    SimilarityPair,
};

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use crate::clustering::{
    edc, hierarchical_complete, kmeans_pp, madc_matrix, similarity_matrix, ClusterAssignment,
};
use crate::datagen::FederatedDataset;
use crate::error::{Error, Result};
use crate::flcore::{client_update, fedavg_round, RoundOutcome, TrainParams};
use crate::models::{self, ModelParams, ModelSpec};
use crate::numkit::{cosine_similarity, DenseMatrix, ParamVector, RngStream, UpdateMatrix};

/// Proximity measure used to cluster pre-training updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Euclidean distance of decomposed cosine profiles; K-Means++.
    Edc,
    /// Mean absolute difference of cosine profiles; complete linkage.
    Madc,
    /// Plain L2 on raw updates; K-Means++.
    L2,
    /// Normalized cosine dissimilarity; complete linkage.
    Cosine,
}

/// Ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    None,
    /// Random cluster membership at cold start.
    Rcc,
    /// Random assignment of cold (newcomer) clients.
    Rac,
}

/// Grouping hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct GroupingConfig {
    /// Number of groups m.
    pub num_groups: usize,
    /// Pre-training scale alpha: alpha * m clients found the groups.
    pub pretrain_scale: usize,
    pub measure: Measure,
    /// Inter-group learning rate.
    pub eta_g: f64,
    pub ablation: Ablation,
}

/// One group's model, founding direction, and member roster.
#[derive(Debug, Clone)]
pub struct GroupState {
    pub group_id: usize,
    pub params: ParamVector,
    /// Founding optimization direction (mean of the founders' updates);
    /// newcomers are matched against it.
    pub cold_direction: ParamVector,
    pub members: BTreeSet<usize>,
}

/// Product of the group cold start.
#[derive(Debug, Clone)]
pub struct ColdStartOutcome {
    pub groups: Vec<GroupState>,
    /// (client id, pre-training update) for every founder, ascending id.
    pub pretrained: Vec<(usize, ParamVector)>,
    pub assignment: ClusterAssignment,
}

/// Pre-train `alpha * m` clients from `w0`, cluster their flattened
/// updates with the configured measure, and found one group per
/// cluster: the group model starts at `w0` plus the mean member update
/// and that mean is kept as the group's cold-start direction.
pub fn group_cold_start(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    w0: &ParamVector,
    gcfg: &GroupingConfig,
    tp: &TrainParams,
    base: &RngStream,
) -> Result<ColdStartOutcome> {
    let m = gcfg.num_groups;
    let n = ds.n_clients();
    let want = gcfg
        .pretrain_scale
        .checked_mul(m)
        .ok_or_else(|| Error::InvalidArgument("pretrain scale overflow".into()))?;
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one group".into()));
    }
    if want > n {
        return Err(Error::InsufficientClients { needed: want, have: n });
    }

    // Uniform founder subset, then pre-training updates in id order.
    let mut sel_rng = base.derive("cold_select", &[]);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..want {
        let j = i + sel_rng.random_range(0..n - i);
        pool.swap(i, j);
    }
    let mut founders = pool[..want].to_vec();
    founders.sort_unstable();

    let pretrained: Vec<(usize, ParamVector)> = founders
        .par_iter()
        .map(|&id| {
            let mut rng = base.derive("pretrain", &[id as u64]);
            client_update(ds.shard(id), spec, w0, tp, &mut rng).map(|d| (id, d))
        })
        .collect::<Result<_>>()?;
    let updates = UpdateMatrix::new(pretrained.iter().map(|(_, d)| d.clone()).collect())?;

    let assignment = cluster_updates(&updates, gcfg, base)?;

    let mut groups = Vec::with_capacity(m);
    for g in 0..m {
        let member_rows: Vec<usize> = assignment
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == g)
            .map(|(i, _)| i)
            .collect();
        if member_rows.is_empty() {
            return Err(Error::EmptyGroup { group_id: g });
        }
        let member_updates: Vec<ParamVector> = member_rows
            .iter()
            .map(|&i| updates.row(i).clone())
            .collect();
        let direction = ParamVector::mean_of(&member_updates)?;
        let members: BTreeSet<usize> = member_rows.iter().map(|&i| pretrained[i].0).collect();
        groups.push(GroupState {
            group_id: g,
            params: w0.add(&direction),
            cold_direction: direction,
            members,
        });
    }
    Ok(ColdStartOutcome {
        groups,
        pretrained,
        assignment,
    })
}

fn cluster_updates(
    updates: &UpdateMatrix,
    gcfg: &GroupingConfig,
    base: &RngStream,
) -> Result<ClusterAssignment> {
    let m = gcfg.num_groups;
    if gcfg.ablation == Ablation::Rcc {
        let mut rng = base.derive("rcc", &[]);
        let labels = (0..updates.n()).map(|_| rng.random_range(0..m)).collect();
        return Ok(ClusterAssignment {
            labels,
            centers: None,
        });
    }
    match gcfg.measure {
        Measure::Edc => {
            let embedding = edc(updates, m)?;
            kmeans_pp(&embedding.features, m, &mut base.derive("kmeans", &[]))
        }
        Measure::Madc => {
            let sim = similarity_matrix(updates)?;
            hierarchical_complete(&madc_matrix(&sim)?, m)
        }
        Measure::L2 => kmeans_pp(&updates.as_dense(), m, &mut base.derive("kmeans", &[])),
        Measure::Cosine => {
            let sim = similarity_matrix(updates)?;
            let n = updates.n();
            let dissim =
                DenseMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (-sim.get(i, j) + 1.0) / 2.0 });
            hierarchical_complete(&dissim, m)
        }
    }
}

/// Newcomer-to-group assignment.
#[derive(Debug, Clone, Copy)]
pub struct Assignment {
    pub group_id: usize,
    /// Normalized cosine dissimilarity to the chosen group's founding
    /// direction, in [0, 1].
    pub dissimilarity: f64,
}

/// Normalized cosine dissimilarity between an update and a direction.
pub fn cold_dissimilarity(update: &ParamVector, direction: &ParamVector) -> Result<f64> {
    Ok((-cosine_similarity(update, direction)? + 1.0) / 2.0)
}

/// Assign a newcomer to the group whose founding direction minimizes
/// the normalized cosine dissimilarity of its pre-training update; ties
/// break toward the lowest group id. Under the RAC ablation the group
/// is drawn uniformly instead (the dissimilarity reported is still the
/// one to the drawn group).
pub fn client_cold_start(
    newcomer_update: &ParamVector,
    groups: &[GroupState],
    ablation: Ablation,
    rng: &mut RngStream,
) -> Result<Assignment> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no groups to assign into".into()));
    }
    if ablation == Ablation::Rac {
        let g = rng.random_range(0..groups.len());
        return Ok(Assignment {
            group_id: groups[g].group_id,
            dissimilarity: cold_dissimilarity(newcomer_update, &groups[g].cold_direction)?,
        });
    }
    let mut best: Option<Assignment> = None;
    for g in groups {
        let d = cold_dissimilarity(newcomer_update, &g.cold_direction)?;
        let better = match &best {
            None => true,
            Some(b) => d < b.dissimilarity,
        };
        if better {
            best = Some(Assignment {
                group_id: g.group_id,
                dissimilarity: d,
            });
        }
    }
    Ok(best.expect("nonempty groups"))
}

/// One intra-group training round. An empty selection leaves the group
/// parameters bit-identical; otherwise this is a FedAvg (mu = 0) or
/// FedProx (mu > 0) round over the selected members starting from the
/// group model.
pub fn intra_group_update(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    group: &GroupState,
    selected_members: &[usize],
    tp: &TrainParams,
    round: usize,
    base: &RngStream,
) -> Result<RoundOutcome> {
    if selected_members.is_empty() {
        return Ok(RoundOutcome {
            new_global: group.params.clone(),
            client_models: Vec::new(),
        });
    }
    fedavg_round(ds, spec, &group.params, selected_members, tp, round, base)
}

/// Inter-group aggregation: every group adds the eta_g-scaled unit
/// directions of all other groups, read from a pre-aggregation
/// snapshot. `eta_g = 0` is the bit-exact identity.
pub fn inter_group_aggregation(
    group_params: &[ParamVector],
    eta_g: f64,
) -> Result<Vec<ParamVector>> {
    if eta_g < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inter-group rate must be nonnegative, got {eta_g}"
        )));
    }
    if eta_g == 0.0 || group_params.len() <= 1 {
        return Ok(group_params.to_vec());
    }
    let norms: Vec<f64> = group_params.iter().map(|p| p.norm()).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroVector {
            context: "inter-group aggregation",
        });
    }
    let mut out = Vec::with_capacity(group_params.len());
    for j in 0..group_params.len() {
        let mut w = group_params[j].clone();
        for (l, p) in group_params.iter().enumerate() {
            if l != j {
                w.add_scaled(eta_g / norms[l], p);
            }
        }
        out.push(w);
    }
    Ok(out)
}

/// Total correct predictions over total test size across groups, from
/// per-group `(test_size, correct_count)` pairs.
pub fn weighted_accuracy(group_results: &[(usize, usize)]) -> Result<f64> {
    let total: usize = group_results.iter().map(|(size, _)| size).sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "weighted accuracy over zero test samples".into(),
        ));
    }
    let correct: usize = group_results.iter().map(|(_, c)| c).sum();
    Ok(correct as f64 / total as f64)
}

/// FeSEM assignment rule: nearest group model in L2; ties to the lowest
/// group id.
pub fn fesem_assign(client_vec: &ParamVector, group_params: &[ParamVector]) -> usize {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (g, p) in group_params.iter().enumerate() {
        let d = client_vec.distance(p);
        if d < best {
            best = d;
            arg = g;
        }
    }
    arg
}

/// IFCA assignment rule: the group whose model minimizes the client's
/// training loss; ties to the lowest group id.
pub fn ifca_assign(
    ds: &FederatedDataset,
    spec: &ModelSpec,
    client_id: usize,
    group_params: &[ParamVector],
) -> Result<usize> {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (g, p) in group_params.iter().enumerate() {
        let params = ModelParams::from_flat(*spec, p.clone())?;
        let l = models::loss(&params, &ds.shard(client_id).train)?;
        if l < best {
            best = l;
            arg = g;
        }
    }
    Ok(arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{digits_pool, partition_noniid};

    fn planted_two_population_dataset(n_clients: usize, seed: u64) -> FederatedDataset {
        // Two planted populations with disjoint label pairs ({0,1} vs
        // {6,7}), so pre-training updates form two tight, near-opposite
        // bundles. Clients below n/2 belong to the first population.
        let (f, l) = digits_pool(4000, &mut RngStream::new(seed, 0));
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
        let (f_low, l_low) = take([0, 1]);
        let (f_high, l_high) = take([6, 7]);
        let half = n_clients / 2;
        let a = partition_noniid(&f_low, &l_low, half, 2, &mut RngStream::new(seed, 1)).unwrap();
        let b =
            partition_noniid(&f_high, &l_high, n_clients - half, 2, &mut RngStream::new(seed, 2))
                .unwrap();
        let mut shards = a.shards;
        for mut s in b.shards {
            s.client_id += half;
            shards.push(s);
        }
        FederatedDataset::new(shards, 10, 64, crate::datagen::Provenance::Partitioned).unwrap()
    }

    fn default_tp() -> TrainParams {
        TrainParams {
            local_epochs: 5,
            batch_size: 10,
            eta: 0.05,
            mu: 0.0,
        }
    }

    #[test]
    fn cold_start_recovers_planted_populations() {
        let ds = planted_two_population_dataset(20, 3);
        let spec = ModelSpec::mclr(64, 10);
        let w0 = ParamVector::zeros(spec.parameter_count());
        let gcfg = GroupingConfig {
            num_groups: 2,
            pretrain_scale: 10,
            measure: Measure::Edc,
            eta_g: 0.0,
            ablation: Ablation::None,
        };
        let out =
            group_cold_start(&ds, &spec, &w0, &gcfg, &default_tp(), &RngStream::root(7)).unwrap();
        assert_eq!(out.groups.len(), 2);
        // every founder landed with its own population
        for g in &out.groups {
            let low = g.members.iter().filter(|&&id| id < 10).count();
            assert!(
                low == 0 || low == g.members.len(),
                "group {} mixes populations: {:?}",
                g.group_id,
                g.members
            );
        }
    }

    #[test]
    fn cold_start_single_group_takes_mean_direction() {
        let ds = planted_two_population_dataset(8, 5);
        let spec = ModelSpec::mclr(64, 10);
        let w0 = ParamVector::zeros(spec.parameter_count());
        let gcfg = GroupingConfig {
            num_groups: 1,
            pretrain_scale: 8,
            measure: Measure::Edc,
            eta_g: 0.0,
            ablation: Ablation::None,
        };
        let out =
            group_cold_start(&ds, &spec, &w0, &gcfg, &default_tp(), &RngStream::root(9)).unwrap();
        assert_eq!(out.groups.len(), 1);
        let updates: Vec<ParamVector> = out.pretrained.iter().map(|(_, d)| d.clone()).collect();
        let mean = ParamVector::mean_of(&updates).unwrap();
        assert_eq!(out.groups[0].cold_direction, mean);
        assert_eq!(out.groups[0].params, w0.add(&mean));
    }

    #[test]
    fn rcc_assigns_randomly_but_still_averages_members() {
        let ds = planted_two_population_dataset(20, 11);
        let spec = ModelSpec::mclr(64, 10);
        let w0 = ParamVector::zeros(spec.parameter_count());
        let gcfg = GroupingConfig {
            num_groups: 2,
            pretrain_scale: 10,
            measure: Measure::Edc,
            eta_g: 0.0,
            ablation: Ablation::Rcc,
        };
        let out =
            group_cold_start(&ds, &spec, &w0, &gcfg, &default_tp(), &RngStream::root(13)).unwrap();
        for g in &out.groups {
            let member_updates: Vec<ParamVector> = out
                .pretrained
                .iter()
                .filter(|(id, _)| g.members.contains(id))
                .map(|(_, d)| d.clone())
                .collect();
            let mean = ParamVector::mean_of(&member_updates).unwrap();
            assert_eq!(g.cold_direction, mean);
        }
        // with 20 founders over 2 random bins, a pure-population split
        // by chance has probability ~2^-19; require a mixed group
        let mixed = out.groups.iter().any(|g| {
            let low = g.members.iter().filter(|&&id| id < 10).count();
            low != 0 && low != g.members.len()
        });
        assert!(mixed, "random membership produced a clean split");
    }

    #[test]
    fn cold_start_needs_enough_clients() {
        let ds = planted_two_population_dataset(6, 15);
        let spec = ModelSpec::mclr(64, 10);
        let w0 = ParamVector::zeros(spec.parameter_count());
        let gcfg = GroupingConfig {
            num_groups: 2,
            pretrain_scale: 10,
            measure: Measure::Edc,
            eta_g: 0.0,
            ablation: Ablation::None,
        };
        assert!(matches!(
            group_cold_start(&ds, &spec, &w0, &gcfg, &default_tp(), &RngStream::root(1)),
            Err(Error::InsufficientClients { .. })
        ));
    }

    fn toy_groups(directions: &[Vec<f64>]) -> Vec<GroupState> {
        directions
            .iter()
            .enumerate()
            .map(|(g, d)| GroupState {
                group_id: g,
                params: ParamVector::from_vec(d.clone()),
                cold_direction: ParamVector::from_vec(d.clone()),
                members: BTreeSet::new(),
            })
            .collect()
    }

    #[test]
    fn newcomer_matching_direction_gets_that_group() {
        let groups = toy_groups(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let update = ParamVector::from_vec(vec![0.0, 2.0]);
        let a = client_cold_start(&update, &groups, Ablation::None, &mut RngStream::root(1))
            .unwrap();
        assert_eq!(a.group_id, 1);
        assert!(a.dissimilarity.abs() < 1e-12);
    }

    #[test]
    fn newcomer_orthogonal_vs_parallel() {
        let groups = toy_groups(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // orthogonal to group 0 (dissim 0.5), parallel to group 1 (0.0)
        let update = ParamVector::from_vec(vec![0.0, 1.0]);
        let a = client_cold_start(&update, &groups, Ablation::None, &mut RngStream::root(1))
            .unwrap();
        assert_eq!(a.group_id, 1);
    }

    #[test]
    fn newcomer_angles_match_hand_trigonometry() {
        let angles = [30f64, 60.0, 170.0];
        let dirs: Vec<Vec<f64>> = angles
            .iter()
            .map(|a| {
                let r = a.to_radians();
                vec![r.cos(), r.sin()]
            })
            .collect();
        let groups = toy_groups(&dirs);
        let update = ParamVector::from_vec(vec![1.0, 0.0]);
        let a = client_cold_start(&update, &groups, Ablation::None, &mut RngStream::root(1))
            .unwrap();
        assert_eq!(a.group_id, 0);
        for (g, angle) in angles.iter().enumerate() {
            let d = cold_dissimilarity(&update, &groups[g].cold_direction).unwrap();
            let expected = (-angle.to_radians().cos() + 1.0) / 2.0;
            assert!((d - expected).abs() < 1e-12, "group {g}");
        }
    }

    #[test]
    fn newcomer_assignment_is_scale_invariant() {
        let groups = toy_groups(&[vec![1.0, 0.2], vec![-0.3, 1.0], vec![0.5, -0.5]]);
        let update = ParamVector::from_vec(vec![0.4, 0.9]);
        let mut scaled = update.clone();
        scaled.scale(123.0);
        let a = client_cold_start(&update, &groups, Ablation::None, &mut RngStream::root(1))
            .unwrap();
        let b = client_cold_start(&scaled, &groups, Ablation::None, &mut RngStream::root(1))
            .unwrap();
        assert_eq!(a.group_id, b.group_id);
    }

    #[test]
    fn newcomer_rejects_zero_vectors() {
        let groups = toy_groups(&[vec![1.0, 0.0]]);
        let zero = ParamVector::zeros(2);
        assert!(client_cold_start(&zero, &groups, Ablation::None, &mut RngStream::root(1)).is_err());
    }

    #[test]
    fn empty_selection_leaves_group_untouched() {
        let ds = planted_two_population_dataset(8, 21);
        let spec = ModelSpec::mclr(64, 10);
        let group = GroupState {
            group_id: 0,
            params: ParamVector::from_vec(vec![0.5; spec.parameter_count()]),
            cold_direction: ParamVector::from_vec(vec![1.0; spec.parameter_count()]),
            members: BTreeSet::new(),
        };
        let out = intra_group_update(
            &ds,
            &spec,
            &group,
            &[],
            &default_tp(),
            3,
            &RngStream::root(5),
        )
        .unwrap();
        assert_eq!(out.new_global, group.params);
        assert!(out.client_models.is_empty());
    }

    #[test]
    fn inter_group_identity_cases() {
        let params = vec![
            ParamVector::from_vec(vec![2.0, 0.0]),
            ParamVector::from_vec(vec![0.0, 3.0]),
        ];
        // eta_g = 0 is bit-exact identity
        assert_eq!(inter_group_aggregation(&params, 0.0).unwrap(), params);
        // single group: empty sum
        let single = vec![ParamVector::from_vec(vec![5.0, -1.0])];
        assert_eq!(inter_group_aggregation(&single, 0.3).unwrap(), single);
    }

    #[test]
    fn inter_group_hand_case() {
        let params = vec![
            ParamVector::from_vec(vec![2.0, 0.0]),
            ParamVector::from_vec(vec![0.0, 3.0]),
        ];
        let out = inter_group_aggregation(&params, 0.1).unwrap();
        assert!((out[0].as_slice()[0] - 2.0).abs() < 1e-15);
        assert!((out[0].as_slice()[1] - 0.1).abs() < 1e-15);
        assert!((out[1].as_slice()[0] - 0.1).abs() < 1e-15);
        assert!((out[1].as_slice()[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn inter_group_rejects_zero_norm_models() {
        let params = vec![ParamVector::zeros(2), ParamVector::from_vec(vec![1.0, 0.0])];
        assert!(inter_group_aggregation(&params, 0.1).is_err());
    }

    #[test]
    fn weighted_accuracy_hand_cases() {
        assert_eq!(weighted_accuracy(&[(10, 9), (30, 15)]).unwrap(), 0.6);
        assert_eq!(weighted_accuracy(&[(25, 20)]).unwrap(), 0.8);
        assert_eq!(weighted_accuracy(&[(5, 5), (7, 7)]).unwrap(), 1.0);
        assert!(weighted_accuracy(&[]).is_err());
    }

    #[test]
    fn fesem_assign_matches_brute_force() {
        let mut rng = RngStream::new(77, 0);
        for _ in 0..50 {
            let groups: Vec<ParamVector> = (0..4)
                .map(|_| {
                    ParamVector::from_vec((0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
                })
                .collect();
            let v =
                ParamVector::from_vec((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
            let got = fesem_assign(&v, &groups);
            let best = (0..4)
                .min_by(|&a, &b| {
                    v.distance(&groups[a])
                        .partial_cmp(&v.distance(&groups[b]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(got, best);
        }
    }

    #[test]
    fn fesem_exact_match_and_ties() {
        let groups = vec![
            ParamVector::from_vec(vec![1.0, 1.0]),
            ParamVector::from_vec(vec![-1.0, -1.0]),
            ParamVector::from_vec(vec![3.0, 0.0]),
        ];
        assert_eq!(fesem_assign(&groups[2], &groups), 2);
        // equidistant from groups 0 and 1: lowest id wins
        let origin = ParamVector::zeros(2);
        assert_eq!(fesem_assign(&origin, &groups[..2]), 0);
    }

    #[test]
    fn ifca_assign_matches_loss_scan_and_breaks_ties_low() {
        let ds = planted_two_population_dataset(6, 33);
        let spec = ModelSpec::mclr(64, 10);
        let mut rng = RngStream::new(5, 5);
        let group_params: Vec<ParamVector> = (0..3)
            .map(|_| {
                ParamVector::from_vec(
                    (0..spec.parameter_count())
                        .map(|_| rng.random_range(-0.05..0.05))
                        .collect(),
                )
            })
            .collect();
        for client in 0..6 {
            let got = ifca_assign(&ds, &spec, client, &group_params).unwrap();
            let losses: Vec<f64> = group_params
                .iter()
                .map(|p| {
                    let mp = ModelParams::from_flat(spec, p.clone()).unwrap();
                    models::loss(&mp, &ds.shard(client).train).unwrap()
                })
                .collect();
            let best = (0..3)
                .min_by(|&a, &b| losses[a].partial_cmp(&losses[b]).unwrap())
                .unwrap();
            assert_eq!(got, best, "client {client}");
        }
        // identical group models: ties resolve to group 0
        let same = vec![group_params[0].clone(), group_params[0].clone()];
        assert_eq!(ifca_assign(&ds, &spec, 0, &same).unwrap(), 0);
    }
}
