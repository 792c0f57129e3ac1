//! Thin CLI over the `fglab` library: `run` executes one experiment (or
//! a seed sweep), `plot` turns run directories into plot-ready data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fglab::experiment::{
    emit_plot_data, parse_config, run_experiment, ExperimentConfig, Overrides,
};

#[derive(Parser)]
#[command(name = "fglab", version, about = "deterministic clustered federated learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run(RunArgs),
    /// Emit plot-ready series (and the measure scatter) from run dirs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (flat TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the framework.
    #[arg(long)]
    framework: Option<String>,
    /// Override the clustering measure (edc | madc).
    #[arg(long)]
    measure: Option<String>,
    /// Override the ablation (none | rcc | rac).
    #[arg(long)]
    ablation: Option<String>,
    /// Verify the convergence bounds instead of ordinary training.
    #[arg(long)]
    verify_bounds: bool,
    /// Comma-separated seed list; each seed runs concurrently into
    /// <output_dir>/seed-<s>/.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Run director(ies) holding metrics.csv.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
}

fn record_failure(dir: &std::path::Path, err: &fglab::Error) {
    // best effort: the error record is diagnostic only
    if std::fs::create_dir_all(dir).is_ok() {
        let body = serde_json::json!({ "error": err.to_string() });
        let _ = std::fs::write(
            dir.join("error.json"),
            format!("{}\n", serde_json::to_string_pretty(&body).unwrap_or_default()),
        );
    }
}

fn execute_run(cfg: &ExperimentConfig) -> ExitCode {
    match run_experiment(cfg) {
        Ok(artifacts) => {
            println!(
                "run complete: max weighted accuracy {:.4} -> {}",
                artifacts.max_weighted_accuracy,
                artifacts.output_dir.display()
            );
            if let Some(v) = artifacts.bound_violations {
                println!("bound violations: {v}");
                if v > 0 {
                    return ExitCode::from(1);
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            record_failure(&cfg.output_dir, &err);
            ExitCode::from(1)
        }
    }
}

fn run_command(args: RunArgs) -> ExitCode {
    let overrides = Overrides {
        seed: args.seed,
        output_dir: args.output_dir,
        framework: args.framework,
        measure: args.measure,
        ablation: args.ablation,
        verify_bounds: args.verify_bounds,
    };
    let cfg = match parse_config(Some(&args.config), &overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    if args.sweep.is_empty() {
        return execute_run(&cfg);
    }

    // Seed sweep: independent runs, isolated output directories.
    let runs: Vec<ExperimentConfig> = args
        .sweep
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.output_dir = cfg.output_dir.join(format!("seed-{seed}"));
            c
        })
        .collect();
    let codes: Vec<ExitCode> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|c| scope.spawn(move || execute_run(c)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    if codes.iter().any(|c| *c != ExitCode::SUCCESS) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn plot_command(args: PlotArgs) -> ExitCode {
    match emit_plot_data(&args.input) {
        Ok(out) => {
            println!("series -> {}", out.series.display());
            if let (Some(path), Some(r)) = (&out.scatter, out.pearson_r) {
                println!("scatter -> {} (pearson r = {r:.6})", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_command(args),
        Command::Plot(args) => plot_command(args),
    }
}
