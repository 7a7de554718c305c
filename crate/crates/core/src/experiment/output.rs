use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{Algorithm, ExperimentConfig};
use super::runner::{run_seed, Diagnostics, RolloutRow};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn run_id(algorithm: Algorithm, epochs_per_rollout: usize, seed: u64) -> String {
    format!("{algorithm}-e{epochs_per_rollout}-s{seed}")
}

pub fn metrics_header(num_skills: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "run_id",
        "seed",
        "algorithm",
        "global_step",
        "rollout_index",
        "on_policy_em_loss_raw",
        "on_policy_em_loss_smoothed",
        "random_agent_em_loss_raw",
        "random_agent_em_loss_smoothed",
        "episode_reward_iqm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..num_skills).map(|z| format!("skill_{z}")));
    h.push("transfer_fired".into());
    h
}

const DIAGNOSTIC_COLUMNS: [&str; 15] = [
    "global_step",
    "rollout_index",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "grad_norm",
    "external_model_train_loss",
    "discriminator_loss",
    "vae_reconstruction",
    "vae_kl",
    "embedding_loss",
    "mean_intrinsic_reward",
    "episodes",
];

/// File locations of one run inside an output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFiles {
    pub dir: PathBuf,
    pub run_id: String,
}

impl RunFiles {
    pub fn new(dir: &Path, run_id: String) -> Self {
        RunFiles { dir: dir.to_path_buf(), run_id }
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.run_id))
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.dir.join(format!("{}.diagnostics.csv", self.run_id))
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join(format!("{}.config", self.run_id))
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join(format!("{}.manifest", self.run_id))
    }
}

/// How a single seed ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_id: String,
    pub seed: u64,
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

fn metrics_record(cfg: &ExperimentConfig, id: &str, seed: u64, row: &RolloutRow) -> Vec<String> {
    let mut r = vec![
        id.to_string(),
        seed.to_string(),
        cfg.algorithm.to_string(),
        row.global_step.to_string(),
        row.rollout_index.to_string(),
        row.on_policy_em_loss_raw.to_string(),
        row.on_policy_em_loss_smoothed.to_string(),
        row.random_agent_em_loss_raw.to_string(),
        row.random_agent_em_loss_smoothed.to_string(),
        row.episode_reward_iqm.to_string(),
    ];
    r.extend(row.skill_distribution.iter().map(f64::to_string));
    r.push(row.transfer_fired.to_string());
    r
}

fn diagnostics_record(row: &RolloutRow, d: &Diagnostics) -> Vec<String> {
    let p = &d.ppo;
    [
        row.global_step as f64,
        row.rollout_index as f64,
        p.policy_loss,
        p.value_loss,
        p.entropy,
        p.approx_kl,
        p.clip_fraction,
        p.grad_norm,
        d.external_model_train_loss,
        d.discriminator_loss,
        d.vae_reconstruction,
        d.vae_kl,
        d.embedding_loss,
        d.mean_intrinsic_reward,
        d.episodes as f64,
    ]
    .iter()
    .map(f64::to_string)
    .collect()
}

fn write_manifest(files: &RunFiles, cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    let status = if outcome.succeeded() { "ok" } else { "failed" };
    let mut text = format!(
        "run_id = {}\nstatus = {status}\nconfig_hash = {}\nseed = {}\nalgorithm = {}\ncode_version = {}\n\
         wall_clock_seconds = {:.3}\nmetrics_csv = {}\ndiagnostics_csv = {}\nconfig_echo = {}\nsummary_csv = {}\n",
        outcome.run_id,
        cfg.hash(),
        outcome.seed,
        cfg.algorithm,
        env!("CARGO_PKG_VERSION"),
        outcome.wall_clock_seconds,
        files.metrics().display(),
        files.diagnostics().display(),
        files.config().display(),
        files.dir.join(SUMMARY_FILE).display(),
    );
    if let Some(e) = &outcome.error {
        text.push_str(&format!("error = {}\n", e.replace('\n', " ")));
    }
    fs::write(files.manifest(), text)?;
    Ok(())
}

fn run_one(cfg: &ExperimentConfig, seed: u64, files: &RunFiles) -> Result<()> {
    let mut echo = cfg.clone();
    echo.seeds = vec![seed];
    fs::write(files.config(), echo.to_text())?;
    let mut metrics = csv::Writer::from_path(files.metrics())?;
    let mut diagnostics = csv::Writer::from_path(files.diagnostics())?;
    metrics.write_record(metrics_header(cfg.diayn.num_skills))?;
    diagnostics.write_record(DIAGNOSTIC_COLUMNS)?;
    run_seed::<f64>(cfg, seed, |row, diag| {
        metrics.write_record(metrics_record(cfg, &files.run_id, seed, row))?;
        diagnostics.write_record(diagnostics_record(row, diag))?;
        metrics.flush()?;
        diagnostics.flush()?;
        Ok(())
    })
}

/// Runs every configured seed into `dir`; a failing seed is recorded and the rest still run.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let files = RunFiles::new(dir, run_id(cfg.algorithm, cfg.external_model.epochs_per_rollout, seed));
        log::info!("starting {} ({} steps)", files.run_id, cfg.total_steps());
        let start = Instant::now();
        let result = run_one(cfg, seed, &files);
        let outcome = RunOutcome {
            run_id: files.run_id.clone(),
            seed,
            error: result.err().map(|e: Error| e.to_string()),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        match &outcome.error {
            None => log::info!("{} finished in {:.1}s", outcome.run_id, outcome.wall_clock_seconds),
            Some(e) => log::error!("{} failed: {e}", outcome.run_id),
        }
        write_manifest(&files, cfg, &outcome)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}
