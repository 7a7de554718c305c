use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use poi_core::experiment::{plot_dir, render_table, run_experiment, summarize_dir, Algorithm, ExperimentConfig};

/// Environment variable naming the root under which default output directories are created.
const OUTPUT_ROOT_VAR: &str = "POI_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "poi", version, about = "Interest-driven exploration experiments on DoorKeyChange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write per-rollout metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        epochs_per_rollout: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the runs in a directory into summary.csv.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Draw loss and reward curves for the runs in a directory.
    Plot {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Failure kinds, mapped onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(_) => 2,
        }
    }
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    algorithm: Option<Algorithm>,
    epochs: Option<usize>,
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(a) = algorithm {
        cfg.algorithm = a;
    }
    if let Some(e) = epochs {
        cfg.external_model.epochs_per_rollout = e;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(cfg.group_hash())
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, algorithm, epochs_per_rollout, out } => {
            let cfg = load_config(&config, seed, algorithm, epochs_per_rollout).map_err(Failure::Config)?;
            let dir = output_dir(&cfg, out);
            let outcomes = run_experiment(&cfg, &dir).map_err(|e| Failure::Run(e.into()))?;
            let failed: Vec<_> = outcomes.iter().filter(|o| !o.succeeded()).map(|o| o.run_id.as_str()).collect();
            println!("{} run(s) written to {}", outcomes.len(), dir.display());
            if !failed.is_empty() {
                return Err(Failure::Run(anyhow::anyhow!("failed runs: {}", failed.join(", "))));
            }
        }
        Command::Summarize { dir } => {
            let rows = summarize_dir(&dir).with_context(|| format!("summarizing {}", dir.display())).map_err(Failure::Run)?;
            print!("{}", render_table(&rows));
        }
        Command::Plot { dir } => {
            let written = (|| {
                if !dir.is_dir() {
                    bail!("{} is not a directory", dir.display());
                }
                Ok(plot_dir(&dir)?)
            })()
            .map_err(Failure::Run)?;
            if written.is_empty() {
                println!("no completed runs in {}; nothing to plot", dir.display());
            }
            for p in written {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Run(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
