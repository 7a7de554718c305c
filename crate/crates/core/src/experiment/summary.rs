use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{Algorithm, ExperimentConfig};
use super::output::{RunFiles, SUMMARY_FILE};
use crate::error::{Error, Result};
use crate::metrics::{adaptive_efficiency, adaptive_performance, iqm, is_converged, EvalMode, MetricSeries};

pub const BASELINE: Algorithm = Algorithm::Ppo;

/// Metrics file of one finished run, with the config it echoed.
#[derive(Debug, Clone)]
pub struct RunData {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub steps: Vec<u64>,
    pub rollout_index: Vec<usize>,
    pub on_policy_raw: Vec<f64>,
    pub on_policy_smoothed: Vec<f64>,
    pub random_agent_raw: Vec<f64>,
    pub random_agent_smoothed: Vec<f64>,
    pub episode_reward_iqm: Vec<f64>,
}

impl RunData {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn transfer_step(&self) -> u64 {
        self.config.pre_transfer_steps
    }

    pub fn smoothed_loss(&self, mode: EvalMode) -> &[f64] {
        match mode {
            EvalMode::OnPolicy => &self.on_policy_smoothed,
            EvalMode::RandomAgent => &self.random_agent_smoothed,
        }
    }

    pub fn loss_threshold(&self, mode: EvalMode) -> f64 {
        match mode {
            EvalMode::OnPolicy => self.config.metrics.on_policy_loss_convergence_threshold,
            EvalMode::RandomAgent => self.config.metrics.random_agent_loss_convergence_threshold,
        }
    }

    /// Episode reward smoothed with a restart at the transfer.
    pub fn smoothed_reward(&self) -> Result<Vec<f64>> {
        let mut series = MetricSeries::default();
        for (&s, &r) in self.steps.iter().zip(&self.episode_reward_iqm) {
            series.push(s, r)?;
        }
        series.smoothed(self.config.metrics.reward_ewma_span_in_rollouts, self.transfer_step())
    }

    pub fn converged(&self) -> Result<bool> {
        Ok(is_converged(
            &self.steps,
            &self.smoothed_reward()?,
            self.transfer_step(),
            self.config.metrics.convergence_reward_threshold,
        ))
    }

    /// Steps after the transfer until the smoothed loss falls to its threshold, censored at the run's end.
    pub fn efficiency(&self, mode: EvalMode) -> f64 {
        adaptive_efficiency(&self.steps, self.smoothed_loss(mode), self.transfer_step(), self.loss_threshold(mode))
            .censored(self.config.post_transfer_steps) as f64
    }

    pub fn performance(&self, mode: EvalMode) -> Option<f64> {
        adaptive_performance(&self.steps, self.smoothed_loss(mode), self.transfer_step())
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::RejectedInput(format!("metrics file lacks column {name}")))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec[i].parse().map_err(|_| Error::RejectedInput(format!("unparseable metrics value {:?}", &rec[i])))
}

/// Reads one run's metrics file and config echo.
pub fn load_run(files: &RunFiles) -> Result<RunData> {
    let config = ExperimentConfig::load(&files.config())?;
    let mut reader = csv::Reader::from_path(files.metrics())?;
    let headers = reader.headers()?.clone();
    let cols = [
        "global_step",
        "rollout_index",
        "on_policy_em_loss_raw",
        "on_policy_em_loss_smoothed",
        "random_agent_em_loss_raw",
        "random_agent_em_loss_smoothed",
        "episode_reward_iqm",
    ]
    .map(|c| column(&headers, c));
    let [step, idx, opr, ops, rar, ras, rew] = cols;
    let (step, idx, opr, ops, rar, ras, rew) = (step?, idx?, opr?, ops?, rar?, ras?, rew?);
    let mut run = RunData {
        run_id: files.run_id.clone(),
        config,
        steps: vec![],
        rollout_index: vec![],
        on_policy_raw: vec![],
        on_policy_smoothed: vec![],
        random_agent_raw: vec![],
        random_agent_smoothed: vec![],
        episode_reward_iqm: vec![],
    };
    for rec in reader.records() {
        let rec = rec?;
        run.steps.push(parse_field(&rec, step)?);
        run.rollout_index.push(parse_field(&rec, idx)?);
        run.on_policy_raw.push(parse_field(&rec, opr)?);
        run.on_policy_smoothed.push(parse_field(&rec, ops)?);
        run.random_agent_raw.push(parse_field(&rec, rar)?);
        run.random_agent_smoothed.push(parse_field(&rec, ras)?);
        run.episode_reward_iqm.push(parse_field(&rec, rew)?);
    }
    Ok(run)
}

/// Every completed run in `dir`, ordered by run id. Runs whose manifest reports failure are skipped.
pub fn load_runs(dir: &Path) -> Result<Vec<RunData>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(".manifest") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    let mut runs = Vec::new();
    for id in ids {
        let files = RunFiles::new(dir, id);
        let manifest = fs::read_to_string(files.manifest())?;
        if !manifest.lines().any(|l| l.trim() == "status = ok") {
            log::warn!("skipping failed run {}", files.run_id);
            continue;
        }
        runs.push(load_run(&files)?);
    }
    Ok(runs)
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub mode: EvalMode,
    pub adaptive_efficiency_iqm: Option<f64>,
    pub adaptive_performance_iqm: Option<f64>,
    pub normalized_adaptive_efficiency_iqm: Option<f64>,
    pub normalized_adaptive_performance_iqm: Option<f64>,
    pub n_converged: usize,
    pub n_total: usize,
    pub baseline_missing: bool,
}

const MODES: [EvalMode; 2] = [EvalMode::OnPolicy, EvalMode::RandomAgent];

fn ratio(v: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (v, base) {
        (Some(v), Some(b)) if b != 0.0 && b.is_finite() => Some(v / b),
        _ => None,
    }
}

/// IQM of each adaptive metric over converged runs, per algorithm and mode, normalized by PPO.
pub fn summarize(runs: &[RunData]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<&'static str, Vec<&RunData>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.algorithm().as_str()).or_default().push(r);
    }
    let mut raw = Vec::new();
    for group in groups.values() {
        let epochs = group[0].config.external_model.epochs_per_rollout;
        if group.iter().any(|r| r.config.external_model.epochs_per_rollout != epochs) {
            return Err(Error::Config(format!(
                "{} runs mix epochs_per_rollout settings; summarize them from separate directories",
                group[0].algorithm()
            )));
        }
        let mut converged = Vec::new();
        for r in group {
            if r.converged()? {
                converged.push(*r);
            } else {
                log::warn!("{} did not converge and is excluded", r.run_id);
            }
        }
        for mode in MODES {
            let (eff, perf) = if converged.is_empty() {
                (None, None)
            } else {
                let e: Vec<f64> = converged.iter().map(|r| r.efficiency(mode)).collect();
                let p: Vec<f64> = converged.iter().filter_map(|r| r.performance(mode)).collect();
                (Some(iqm(&e)?), if p.is_empty() { None } else { Some(iqm(&p)?) })
            };
            raw.push(SummaryRow {
                algorithm: group[0].algorithm(),
                mode,
                adaptive_efficiency_iqm: eff,
                adaptive_performance_iqm: perf,
                normalized_adaptive_efficiency_iqm: None,
                normalized_adaptive_performance_iqm: None,
                n_converged: converged.len(),
                n_total: group.len(),
                baseline_missing: true,
            });
        }
    }
    let baseline: Vec<(EvalMode, Option<f64>, Option<f64>)> = raw
        .iter()
        .filter(|r| r.algorithm == BASELINE)
        .map(|r| (r.mode, r.adaptive_efficiency_iqm, r.adaptive_performance_iqm))
        .collect();
    for row in &mut raw {
        if let Some(&(_, be, bp)) = baseline.iter().find(|b| b.0 == row.mode) {
            row.normalized_adaptive_efficiency_iqm = ratio(row.adaptive_efficiency_iqm, be);
            row.normalized_adaptive_performance_iqm = ratio(row.adaptive_performance_iqm, bp);
            row.baseline_missing = row.normalized_adaptive_efficiency_iqm.is_none()
                && row.normalized_adaptive_performance_iqm.is_none();
        }
    }
    Ok(raw)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "algorithm",
        "mode",
        "adaptive_efficiency_iqm",
        "adaptive_performance_iqm",
        "normalized_adaptive_efficiency_iqm",
        "normalized_adaptive_performance_iqm",
        "n_converged",
        "n_total",
        "baseline_missing",
    ])?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            r.mode.as_str().to_string(),
            cell(r.adaptive_efficiency_iqm),
            cell(r.adaptive_performance_iqm),
            cell(r.normalized_adaptive_efficiency_iqm),
            cell(r.normalized_adaptive_performance_iqm),
            r.n_converged.to_string(),
            r.n_total.to_string(),
            r.baseline_missing.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Normalized metrics as a fixed-width table: one row per algorithm, one column per metric and mode.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut algs: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    algs.dedup();
    let normalized = rows.iter().any(|r| !r.baseline_missing);
    let pick = |r: &SummaryRow, eff: bool| match (eff, normalized) {
        (true, true) => r.normalized_adaptive_efficiency_iqm,
        (false, true) => r.normalized_adaptive_performance_iqm,
        (true, false) => r.adaptive_efficiency_iqm,
        (false, false) => r.adaptive_performance_iqm,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>14} {:>14} {:>14} {:>14} {:>10}",
        "algorithm", "eff on-policy", "eff random", "perf on-policy", "perf random", "converged"
    );
    for a in algs {
        let get = |mode: EvalMode, eff: bool| {
            rows.iter()
                .find(|r| r.algorithm == a && r.mode == mode)
                .and_then(|r| pick(r, eff))
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        };
        let row = rows.iter().find(|r| r.algorithm == a).expect("algorithm present");
        let _ = writeln!(
            out,
            "{:<18} {:>14} {:>14} {:>14} {:>14} {:>10}",
            a.as_str(),
            get(EvalMode::OnPolicy, true),
            get(EvalMode::RandomAgent, true),
            get(EvalMode::OnPolicy, false),
            get(EvalMode::RandomAgent, false),
            format!("{}/{}", row.n_converged, row.n_total)
        );
    }
    if !normalized {
        out.push_str("warning: no ppo baseline runs; values are not normalized\n");
    }
    out
}

/// Loads `dir`, writes its summary file, and returns the rows. Errors when no run is present.
pub fn summarize_dir(dir: &Path) -> Result<Vec<SummaryRow>> {
    let runs = load_runs(dir)?;
    if runs.is_empty() {
        return Err(Error::RejectedInput(format!("no completed runs in {}", dir.display())));
    }
    let rows = summarize(&runs)?;
    write_summary(&rows, &dir.join(SUMMARY_FILE))?;
    Ok(rows)
}
