//! Experiment configuration: a flat key/value TOML file with typed
//! validation, CLI flag overrides, and dataset/framework-aware
//! defaults. Unknown keys are rejected so a config diff always means a
//! behavioral diff.

mod plot;
mod run;

pub use plot::emit_plot_data;
pub use run::{build_dataset, run_experiment, run_experiment_with_threads, run_framework, RunArtifacts};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fedgroup::{Ablation, Measure};
use crate::models::ModelKind;

/// Worker-count cap honored by `run_experiment`.
pub const THREADS_ENV: &str = "FGLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    FedAvg,
    FedProx,
    FedGroup,
    FedGrouProx,
    FeSem,
    Ifca,
}

impl Framework {
    pub fn name(&self) -> &'static str {
        match self {
            Framework::FedAvg => "fedavg",
            Framework::FedProx => "fedprox",
            Framework::FedGroup => "fedgroup",
            Framework::FedGrouProx => "fedgrouprox",
            Framework::FeSem => "fesem",
            Framework::Ifca => "ifca",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Framework::FedAvg),
            "fedprox" => Ok(Framework::FedProx),
            "fedgroup" => Ok(Framework::FedGroup),
            "fedgrouprox" => Ok(Framework::FedGrouProx),
            "fesem" => Ok(Framework::FeSem),
            "ifca" => Ok(Framework::Ifca),
            other => Err(Error::InvalidConfig(format!("unknown framework '{other}'"))),
        }
    }

    pub fn is_grouped(&self) -> bool {
        matches!(
            self,
            Framework::FedGroup | Framework::FedGrouProx | Framework::FeSem | Framework::Ifca
        )
    }

    pub fn is_proximal(&self) -> bool {
        matches!(self, Framework::FedProx | Framework::FedGrouProx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Synthetic,
    Digits,
    Idx { images: PathBuf, labels: PathBuf },
}

impl DatasetSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(DatasetSpec::Synthetic),
            "digits" => Ok(DatasetSpec::Digits),
            other => {
                if let Some(paths) = other.strip_prefix("idx:") {
                    let mut parts = paths.splitn(2, ',');
                    let images = parts.next().unwrap_or_default();
                    let labels = parts.next().unwrap_or_default();
                    if images.is_empty() || labels.is_empty() {
                        return Err(Error::InvalidConfig(
                            "idx dataset needs 'idx:<images>,<labels>'".into(),
                        ));
                    }
                    Ok(DatasetSpec::Idx {
                        images: PathBuf::from(images),
                        labels: PathBuf::from(labels),
                    })
                } else {
                    Err(Error::InvalidConfig(format!("unknown dataset '{other}'")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Synthetic => "synthetic",
            DatasetSpec::Digits => "digits",
            DatasetSpec::Idx { .. } => "idx",
        }
    }
}

/// A fully resolved experiment description; serialized verbatim into
/// `config.resolved.json` for auditability.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub dataset: DatasetSpec,
    pub model: ModelKind,
    pub hidden_units: usize,
    #[serde(rename = "T")]
    pub rounds: usize,
    #[serde(rename = "K")]
    pub clients_per_round: usize,
    #[serde(rename = "E")]
    pub local_epochs: usize,
    #[serde(rename = "B")]
    pub batch_size: usize,
    pub eta: f64,
    pub mu: f64,
    #[serde(rename = "m")]
    pub num_groups: usize,
    #[serde(rename = "alpha")]
    pub pretrain_scale: usize,
    pub eta_g: f64,
    pub measure: Measure,
    pub ablation: Ablation,
    pub classes_per_client: usize,
    pub n_clients: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub verify_bounds: bool,
}

/// CLI-level overrides; every field beats the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub framework: Option<String>,
    pub measure: Option<String>,
    pub ablation: Option<String>,
    pub verify_bounds: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "framework",
    "dataset",
    "model",
    "hidden_units",
    "T",
    "K",
    "E",
    "B",
    "eta",
    "mu",
    "m",
    "alpha",
    "eta_g",
    "measure",
    "ablation",
    "classes_per_client",
    "n_clients",
    "seed",
    "output_dir",
    "verify_bounds",
];

struct RawConfig {
    table: toml::Table,
}

impl RawConfig {
    fn get_str(&self, key: &str) -> Result<Option<String>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key '{key}' must be a string, got {other}"
            ))),
        }
    }

    fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key '{key}' must be a nonnegative integer, got {other}"
            ))),
        }
    }

    fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key '{key}' must be a number, got {other}"
            ))),
        }
    }

    fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key '{key}' must be a boolean, got {other}"
            ))),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }
}

/// Parse and validate an experiment config from an optional file plus
/// CLI overrides, applying the documented defaults for whatever is
/// left unspecified.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::io(p.display().to_string(), e))?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
    for key in table.keys() {
        if !known.contains(key.as_str()) {
            return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
        }
    }
    let raw = RawConfig { table };

    let framework_name = overrides
        .framework
        .clone()
        .or(raw.get_str("framework")?)
        .ok_or_else(|| Error::InvalidConfig("missing required key 'framework'".into()))?;
    let framework = Framework::parse(&framework_name)?;

    let dataset_name = raw
        .get_str("dataset")?
        .ok_or_else(|| Error::InvalidConfig("missing required key 'dataset'".into()))?;
    let dataset = DatasetSpec::parse(&dataset_name)?;

    let model = match raw.get_str("model")?.as_deref() {
        None | Some("mclr") => ModelKind::Mclr,
        Some("mlp") => ModelKind::Mlp,
        Some(other) => {
            return Err(Error::InvalidConfig(format!("unknown model '{other}'")));
        }
    };
    let hidden_units = raw.get_usize("hidden_units")?.unwrap_or(128);

    let rounds = raw
        .get_usize("T")?
        .ok_or_else(|| Error::InvalidConfig("missing required key 'T'".into()))?;
    let seed = overrides
        .seed
        .or(raw.get_usize("seed")?.map(|s| s as u64))
        .ok_or_else(|| Error::InvalidConfig("missing required key 'seed'".into()))?;

    let clients_per_round = raw.get_usize("K")?.unwrap_or(20);
    let local_epochs = raw.get_usize("E")?.unwrap_or(20);
    let batch_explicit = raw.has("B");
    let batch_size = raw.get_usize("B")?.unwrap_or(10);
    let n_clients = raw.get_usize("n_clients")?.unwrap_or(100);
    let classes_per_client = raw.get_usize("classes_per_client")?.unwrap_or(2);

    let eta = raw.get_f64("eta")?.unwrap_or(match dataset {
        DatasetSpec::Synthetic => 0.01,
        DatasetSpec::Digits | DatasetSpec::Idx { .. } => 0.03,
    });
    let mu_explicit = raw.has("mu");
    let mu = raw
        .get_f64("mu")?
        .unwrap_or(if framework.is_proximal() { 1.0 } else { 0.0 });
    let num_groups = raw.get_usize("m")?.unwrap_or(match dataset {
        DatasetSpec::Synthetic => 5,
        DatasetSpec::Digits | DatasetSpec::Idx { .. } => 3,
    });
    let pretrain_scale = raw.get_usize("alpha")?.unwrap_or(20);
    let eta_g = raw.get_f64("eta_g")?.unwrap_or(0.0);

    let measure = match overrides
        .measure
        .clone()
        .or(raw.get_str("measure")?)
        .as_deref()
    {
        None | Some("edc") => Measure::Edc,
        Some("madc") => Measure::Madc,
        Some(other) => {
            return Err(Error::InvalidConfig(format!("unknown measure '{other}'")));
        }
    };
    let ablation = match overrides
        .ablation
        .clone()
        .or(raw.get_str("ablation")?)
        .as_deref()
    {
        None | Some("none") => Ablation::None,
        Some("rcc") => Ablation::Rcc,
        Some("rac") => Ablation::Rac,
        Some(other) => {
            return Err(Error::InvalidConfig(format!("unknown ablation '{other}'")));
        }
    };

    let verify_bounds =
        overrides.verify_bounds || raw.get_bool("verify_bounds")?.unwrap_or(false);

    let output_dir = overrides
        .output_dir
        .clone()
        .or(raw.get_str("output_dir")?.map(PathBuf::from))
        .unwrap_or_else(|| {
            PathBuf::from(format!(
                "runs/{}-{}-seed{}",
                framework.name(),
                dataset.name(),
                seed
            ))
        });

    let cfg = ExperimentConfig {
        framework,
        dataset,
        model,
        hidden_units,
        rounds,
        clients_per_round,
        local_epochs,
        batch_size,
        eta,
        mu,
        num_groups,
        pretrain_scale,
        eta_g,
        measure,
        ablation,
        classes_per_client,
        n_clients,
        seed,
        output_dir,
        verify_bounds,
    };
    validate(&cfg, batch_explicit, mu_explicit)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, batch_explicit: bool, mu_explicit: bool) -> Result<()> {
    if cfg.rounds == 0 {
        return Err(Error::InvalidConfig("T must be at least 1".into()));
    }
    if cfg.n_clients == 0 {
        return Err(Error::InvalidConfig("n_clients must be at least 1".into()));
    }
    if cfg.clients_per_round == 0 || cfg.clients_per_round > cfg.n_clients {
        return Err(Error::InvalidConfig(format!(
            "K must be in [1, n_clients]; got K={} with n_clients={}",
            cfg.clients_per_round, cfg.n_clients
        )));
    }
    if cfg.local_epochs == 0 {
        return Err(Error::InvalidConfig("E must be at least 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("B must be at least 1".into()));
    }
    if cfg.eta <= 0.0 || !cfg.eta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "eta must be positive, got {}",
            cfg.eta
        )));
    }
    if cfg.mu < 0.0 || !cfg.mu.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mu must be nonnegative, got {}",
            cfg.mu
        )));
    }
    if cfg.eta_g < 0.0 || !cfg.eta_g.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "eta_g must be nonnegative, got {}",
            cfg.eta_g
        )));
    }
    if cfg.framework.is_grouped() {
        if cfg.num_groups == 0 {
            return Err(Error::InvalidConfig(
                "grouped frameworks need m >= 1".into(),
            ));
        }
        if cfg.pretrain_scale == 0 {
            return Err(Error::InvalidConfig("alpha must be at least 1".into()));
        }
        // The verification harness assigns groups round-robin and never
        // cold-starts, so the founder budget only binds ordinary runs.
        if matches!(cfg.framework, Framework::FedGroup | Framework::FedGrouProx)
            && !cfg.verify_bounds
            && cfg.num_groups > 1
            && cfg.pretrain_scale * cfg.num_groups > cfg.n_clients
        {
            return Err(Error::InvalidConfig(format!(
                "cold start needs alpha*m <= n_clients; got {}*{} > {}",
                cfg.pretrain_scale, cfg.num_groups, cfg.n_clients
            )));
        }
    }
    if cfg.classes_per_client == 0 {
        return Err(Error::InvalidConfig(
            "classes_per_client must be at least 1".into(),
        ));
    }
    if cfg.verify_bounds {
        if cfg.framework != Framework::FedGroup {
            return Err(Error::InvalidConfig(
                "bound verification runs under framework = \"fedgroup\"".into(),
            ));
        }
        if cfg.model != ModelKind::Mclr {
            return Err(Error::InvalidConfig(
                "bound verification needs the convex mclr model".into(),
            ));
        }
        if mu_explicit && cfg.mu != 0.0 {
            return Err(Error::InvalidConfig(
                "bound verification needs mu = 0".into(),
            ));
        }
        if batch_explicit {
            return Err(Error::InvalidConfig(
                "bound verification runs full-gradient local steps; remove the B key".into(),
            ));
        }
    }
    Ok(())
}
