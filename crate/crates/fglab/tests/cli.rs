//! End-to-end checks of the `fglab` binary: exit codes, artifact
//! layout, flag overrides, the seed sweep, and plot emission.

use std::path::Path;
use std::process::Command;

fn fglab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fglab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = "framework = \"fedgroup\"\ndataset = \"digits\"\nT = 2\nseed = 5\n\
                         n_clients = 12\nK = 4\nE = 2\nm = 2\nalpha = 3\n";

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    let output = fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .env("FGLAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for name in [
        "config.resolved.json",
        "metrics.csv",
        "summary.json",
        "grouping_audit.json",
        "similarity.csv",
        "timing.json",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("config.resolved.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["framework"], "fedgroup");
    assert_eq!(resolved["E"], 2);
}

#[test]
fn flag_overrides_beat_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    let output = fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .args(["--framework", "fedavg", "--seed", "9"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("config.resolved.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["framework"], "fedavg");
    assert_eq!(resolved["seed"], 9);
    // ungrouped run: no audit, no similarity dump
    assert!(!out_dir.join("grouping_audit.json").exists());
}

#[test]
fn invalid_config_fails_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "framework = \"fedavg\"\ndataset = \"digits\"\nT = 2\nseed = 1\nbogus_key = 1\n",
    );
    let output = fglab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("bogus_key"));
}

#[test]
fn failed_run_leaves_a_machine_readable_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    // parses fine, fails at ingestion time
    let cfg = write_config(
        tmp.path(),
        "framework = \"fedavg\"\ndataset = \"idx:missing-images.idx,missing-labels.idx\"\n\
         T = 2\nseed = 5\nn_clients = 4\nK = 2\n",
    );
    let out_dir = tmp.path().join("out");
    let output = fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("error.json")).unwrap())
            .unwrap();
    assert!(record["error"].as_str().unwrap().contains("missing-images"));
}

#[test]
fn sweep_runs_each_seed_into_its_own_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("sweep");
    let output = fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .args(["--sweep", "3,4"])
        .output()
        .unwrap();
    assert!(output.status.success());
    for seed in [3, 4] {
        let dir = out_dir.join(format!("seed-{seed}"));
        assert!(dir.join("metrics.csv").exists(), "missing seed {seed} run");
        let resolved: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("config.resolved.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(resolved["seed"], seed);
    }
}

#[test]
fn plot_emits_series_and_scatter() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    assert!(fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let output = fglab()
        .args(["plot", "--input"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(out_dir.join("series.csv").exists());
    assert!(out_dir.join("edc_madc_scatter.csv").exists());
    assert!(out_dir.join("plot_summary.json").exists());
    let series = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert!(series.starts_with("round,framework,metric,value"));
    // 2 rounds x 3 metrics
    assert_eq!(series.lines().count(), 1 + 6);
    // scatter rows = C(6, 2) pairs from the 6 pre-trained founders
    let scatter = std::fs::read_to_string(out_dir.join("edc_madc_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 15);
}

#[test]
fn bound_verification_exit_code_reflects_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "framework = \"fedgroup\"\ndataset = \"digits\"\nT = 2\nseed = 3\n\
         n_clients = 6\nK = 6\nE = 3\nm = 3\nalpha = 1\neta = 0.01\nverify_bounds = true\n",
    );
    let out_dir = tmp.path().join("out");
    let output = fglab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out_dir.join("bound_report.json").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bound_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["violations"], 0);
}
