//! Experiment driver: dataset construction, framework dispatch, and
//! artifact persistence.
//!
//! A run directory always contains `config.resolved.json`,
//! `metrics.csv` and `summary.json`; grouped frameworks add
//! `grouping_audit.json` (and `similarity.csv` when clients
//! pre-trained); bound verification adds `bound_report.json`. Wall time
//! goes to `timing.json`, kept apart so every other artifact is a pure
//! function of config and seed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::{DatasetSpec, ExperimentConfig, Framework, THREADS_ENV};
use crate::bounds::{verify_bounds, BoundsConfig};
use crate::datagen::{digits_pool, generate_synthetic, load_idx, partition_noniid, FederatedDataset};
use crate::error::{Error, Result};
use crate::fedgroup::{
    run_fedgroup, run_fesem, run_ifca, AuditRecord, FedGroupOptions, GroupingConfig,
    SimilarityPair,
};
use crate::flcore::{run_fedavg, FedAvgOptions, RoundMetrics, TrainParams, METRICS_HEADER};
use crate::models::{ModelKind, ModelSpec};
use crate::numkit::{self, ParamVector, RngStream};

/// Everything a finished run leaves behind, plus the numbers the CLI
/// needs for its exit code.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub max_weighted_accuracy: f64,
    pub bound_violations: Option<usize>,
}

/// In-memory result of a framework run, before persistence.
#[derive(Debug, Clone)]
pub struct FrameworkRun {
    pub metrics: Vec<RoundMetrics>,
    pub trajectory: Vec<ParamVector>,
    pub audit: Option<Vec<AuditRecord>>,
    pub similarity: Option<Vec<SimilarityPair>>,
}

/// Build the dataset and model the config describes.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<(FederatedDataset, ModelSpec)> {
    let root = RngStream::root(cfg.seed);
    let (ds, input_dim, num_classes) = match &cfg.dataset {
        DatasetSpec::Synthetic => {
            let ds = generate_synthetic(1.0, 1.0, cfg.n_clients, &mut root.derive("datagen", &[]))?;
            (ds, 60, 10)
        }
        DatasetSpec::Digits => {
            let (features, labels) =
                digits_pool(cfg.n_clients * 80, &mut root.derive("digits", &[]));
            let ds = partition_noniid(
                &features,
                &labels,
                cfg.n_clients,
                cfg.classes_per_client.min(10),
                &mut root.derive("partition", &[]),
            )?;
            (ds, 64, 10)
        }
        DatasetSpec::Idx { images, labels } => {
            let (features, labels) = load_idx(images, labels)?;
            let num_classes = labels.iter().max().map(|m| m + 1).unwrap_or(0);
            let input_dim = features.ncols();
            let ds = partition_noniid(
                &features,
                &labels,
                cfg.n_clients,
                cfg.classes_per_client.min(num_classes),
                &mut root.derive("partition", &[]),
            )?;
            (ds, input_dim, num_classes)
        }
    };
    let spec = match cfg.model {
        ModelKind::Mclr => ModelSpec::mclr(input_dim, num_classes),
        ModelKind::Mlp => ModelSpec::mlp(input_dim, num_classes, cfg.hidden_units),
    };
    Ok((ds, spec))
}

/// Run the configured framework on a prebuilt dataset.
pub fn run_framework(
    cfg: &ExperimentConfig,
    ds: &FederatedDataset,
    spec: &ModelSpec,
) -> Result<FrameworkRun> {
    let tp = TrainParams {
        local_epochs: cfg.local_epochs,
        batch_size: cfg.batch_size,
        eta: cfg.eta,
        mu: cfg.mu,
    };
    match cfg.framework {
        Framework::FedAvg | Framework::FedProx => {
            let run = run_fedavg(
                ds,
                spec,
                &FedAvgOptions {
                    rounds: cfg.rounds,
                    clients_per_round: cfg.clients_per_round,
                    tp,
                    seed: cfg.seed,
                },
            )?;
            Ok(FrameworkRun {
                metrics: run.metrics,
                trajectory: run.trajectory,
                audit: None,
                similarity: None,
            })
        }
        Framework::FedGroup | Framework::FedGrouProx | Framework::FeSem | Framework::Ifca => {
            let opts = FedGroupOptions {
                rounds: cfg.rounds,
                clients_per_round: cfg.clients_per_round,
                tp,
                grouping: GroupingConfig {
                    num_groups: cfg.num_groups,
                    pretrain_scale: cfg.pretrain_scale,
                    measure: cfg.measure,
                    eta_g: cfg.eta_g,
                    ablation: cfg.ablation,
                },
                seed: cfg.seed,
            };
            let run = match cfg.framework {
                Framework::FeSem => run_fesem(ds, spec, &opts)?,
                Framework::Ifca => run_ifca(ds, spec, &opts)?,
                _ => run_fedgroup(ds, spec, &opts)?,
            };
            Ok(FrameworkRun {
                metrics: run.metrics,
                trajectory: run.trajectory,
                audit: Some(run.audit),
                similarity: run.similarity_pairs,
            })
        }
    }
}

#[derive(Serialize)]
struct Summary {
    framework: &'static str,
    dataset: &'static str,
    seed: u64,
    rounds: usize,
    max_weighted_accuracy: f64,
    best_round: usize,
    final_weighted_accuracy: f64,
    /// Discrepancy statistics over the settled second half of the run
    /// (the cold-start ramp would otherwise dominate short runs).
    discrepancy_mean: f64,
    discrepancy_variance: f64,
    final_discrepancy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_violations: Option<usize>,
}

#[derive(Serialize)]
struct AuditFile<'a> {
    group_initialization: &'static str,
    records: &'a [AuditRecord],
}

/// The interpretation note carried in every grouping audit header.
const GROUP_INIT_NOTE: &str = "each group starts at the initial model plus the mean of its \
founders' pre-training updates; that mean is kept as the group's cold-start direction";

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn metrics_csv(metrics: &[RoundMetrics], framework: &str) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in metrics {
        out.push_str(&row.csv_row(framework));
        out.push('\n');
    }
    out
}

fn similarity_csv(pairs: &[SimilarityPair]) -> String {
    let mut out = String::from("client_i,client_j,edc,madc\n");
    for p in pairs {
        out.push_str(&format!("{},{},{},{}\n", p.client_i, p.client_j, p.edc, p.madc));
    }
    out
}

fn summarize(cfg: &ExperimentConfig, metrics: &[RoundMetrics], violations: Option<usize>) -> Summary {
    let discs: Vec<f64> = metrics
        .iter()
        .skip(metrics.len() / 2)
        .map(|m| m.discrepancy)
        .collect();
    let (best_round, max_acc) = metrics
        .iter()
        .map(|m| (m.round, m.weighted_accuracy))
        .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    Summary {
        framework: cfg.framework.name(),
        dataset: cfg.dataset.name(),
        seed: cfg.seed,
        rounds: metrics.len(),
        max_weighted_accuracy: max_acc,
        best_round,
        final_weighted_accuracy: metrics.last().map(|m| m.weighted_accuracy).unwrap_or(0.0),
        discrepancy_mean: numkit::mean(&discs),
        discrepancy_variance: numkit::variance(&discs),
        final_discrepancy: discs.last().copied().unwrap_or(0.0),
        bound_violations: violations,
    }
}

/// Run one experiment end to end, honoring the `FGLAB_THREADS` cap.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1);
    run_experiment_with_threads(cfg, threads)
}

/// As [`run_experiment`] with an explicit worker cap (`None` keeps the
/// default pool). Results are identical for every cap.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<RunArtifacts> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| run_experiment_inner(cfg))
        }
        None => run_experiment_inner(cfg),
    }
}

fn run_experiment_inner(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_json(&dir.join("config.resolved.json"), cfg)?;

    let (ds, spec) = build_dataset(cfg)?;

    let (metrics, audit, similarity, violations) = if cfg.verify_bounds {
        let report = verify_bounds(
            &ds,
            &spec,
            &BoundsConfig {
                num_groups: cfg.num_groups,
                rounds: cfg.rounds,
                local_epochs: cfg.local_epochs,
                eta: Some(cfg.eta),
                eta_g: cfg.eta_g,
                slack_rel: 1e-9,
            },
        )?;
        write_json(&dir.join("bound_report.json"), &report)?;
        // round-robin membership, enrolled from the start
        let audit: Vec<AuditRecord> = (0..ds.n_clients())
            .map(|id| AuditRecord {
                client_id: id,
                group_id: id % cfg.num_groups,
                assignment_round: 0,
                assignment_dissimilarity: 0.0,
            })
            .collect();
        (report.round_metrics.clone(), Some(audit), None, Some(report.violations))
    } else {
        let run = run_framework(cfg, &ds, &spec)?;
        (run.metrics, run.audit, run.similarity, None)
    };

    write_text(
        &dir.join("metrics.csv"),
        &metrics_csv(&metrics, cfg.framework.name()),
    )?;
    let summary = summarize(cfg, &metrics, violations);
    write_json(&dir.join("summary.json"), &summary)?;
    if let Some(records) = &audit {
        write_json(
            &dir.join("grouping_audit.json"),
            &AuditFile {
                group_initialization: GROUP_INIT_NOTE,
                records,
            },
        )?;
    }
    if let Some(pairs) = &similarity {
        write_text(&dir.join("similarity.csv"), &similarity_csv(pairs))?;
    }

    // Wall time lives outside the deterministic artifact set.
    let timing = dir.join("timing.json");
    let mut f = std::fs::File::create(&timing)
        .map_err(|e| Error::io(timing.display().to_string(), e))?;
    writeln!(f, "{{\"wall_time_secs\": {}}}", started.elapsed().as_secs_f64())
        .map_err(|e| Error::io(timing.display().to_string(), e))?;

    Ok(RunArtifacts {
        output_dir: dir.clone(),
        max_weighted_accuracy: summary.max_weighted_accuracy,
        bound_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{parse_config, Overrides};

    fn config_for(dir: &Path, body: &str) -> ExperimentConfig {
        let path = dir.join("cfg.toml");
        std::fs::write(&path, body).unwrap();
        let overrides = Overrides {
            output_dir: Some(dir.join("out")),
            ..Overrides::default()
        };
        parse_config(Some(&path), &overrides).unwrap()
    }

    #[test]
    fn run_writes_all_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config_for(
            tmp.path(),
            "framework = \"fedgroup\"\ndataset = \"digits\"\nT = 2\nseed = 4\n\
             n_clients = 12\nK = 4\nE = 2\nm = 2\nalpha = 3\n",
        );
        let out = run_experiment_with_threads(&cfg, Some(2)).unwrap();
        for name in [
            "config.resolved.json",
            "metrics.csv",
            "summary.json",
            "grouping_audit.json",
            "similarity.csv",
            "timing.json",
        ] {
            assert!(out.output_dir.join(name).exists(), "missing {name}");
        }
        let csv = std::fs::read_to_string(out.output_dir.join("metrics.csv")).unwrap();
        assert!(csv.starts_with(METRICS_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn reruns_are_byte_identical_across_thread_counts() {
        let tmp = tempfile::tempdir().unwrap();
        let body = "framework = \"fedgroup\"\ndataset = \"digits\"\nT = 2\nseed = 9\n\
                    n_clients = 10\nK = 4\nE = 2\nm = 2\nalpha = 2\n";
        let path = tmp.path().join("cfg.toml");
        std::fs::write(&path, body).unwrap();
        let mut outputs = Vec::new();
        for (i, threads) in [(0, Some(1)), (1, Some(4))] {
            let overrides = Overrides {
                output_dir: Some(tmp.path().join(format!("out{i}"))),
                ..Overrides::default()
            };
            let cfg = parse_config(Some(&path), &overrides).unwrap();
            let art = run_experiment_with_threads(&cfg, threads).unwrap();
            outputs.push(art.output_dir);
        }
        for name in ["metrics.csv", "summary.json", "grouping_audit.json", "similarity.csv"] {
            let a = std::fs::read(outputs[0].join(name)).unwrap();
            let b = std::fs::read(outputs[1].join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across thread counts");
        }
    }

    #[test]
    fn proximal_grouped_framework_runs_with_default_mu() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config_for(
            tmp.path(),
            "framework = \"fedgrouprox\"\ndataset = \"digits\"\nT = 2\nseed = 6\n\
             n_clients = 10\nK = 4\nE = 2\nm = 2\nalpha = 2\n",
        );
        assert_eq!(cfg.mu, 1.0);
        let out = run_experiment_with_threads(&cfg, Some(1)).unwrap();
        let resolved: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.output_dir.join("config.resolved.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(resolved["framework"], "fedgrouprox");
        assert_eq!(resolved["mu"], 1.0);
    }

    #[test]
    fn perceptron_model_runs_end_to_end() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config_for(
            tmp.path(),
            "framework = \"fedavg\"\ndataset = \"digits\"\nT = 2\nseed = 8\n\
             n_clients = 8\nK = 4\nE = 2\nmodel = \"mlp\"\nhidden_units = 16\n",
        );
        let out = run_experiment_with_threads(&cfg, Some(1)).unwrap();
        let csv = std::fs::read_to_string(out.output_dir.join("metrics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let resolved: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.output_dir.join("config.resolved.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(resolved["model"], "mlp");
    }

    #[test]
    fn verify_bounds_run_writes_report() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config_for(
            tmp.path(),
            "framework = \"fedgroup\"\ndataset = \"digits\"\nT = 2\nseed = 3\n\
             n_clients = 6\nK = 6\nE = 4\nm = 3\nalpha = 1\nverify_bounds = true\n",
        );
        let out = run_experiment_with_threads(&cfg, Some(1)).unwrap();
        assert!(out.output_dir.join("bound_report.json").exists());
        assert_eq!(out.bound_violations, Some(0));
    }
}
