//! Loss smoothing, adaptation metrics, robust aggregation and random-agent evaluation.

use rand::Rng;

use crate::env::{DoorKeyChange, NUM_ACTIONS, OBS_DIM};
use crate::error::{reject, Error, Result};
use crate::external_model::{ExternalModel, LabeledSet};
use crate::nn::seeded_rng;
use crate::Scalar;

pub fn ewma_alpha(span: usize) -> f64 {
    2.0 / (span as f64 + 1.0)
}

/// `s_0 = x_0`, `s_t = a x_t + (1 - a) s_{t-1}` with `a = 2 / (span + 1)`.
///
/// Evaluated as `s_{t-1} + a (x_t - s_{t-1})`, which keeps rounding relative to the
/// spread of the data rather than its offset.
pub fn ewma_smooth(xs: &[f64], span: usize) -> Result<Vec<f64>> {
    if span == 0 {
        return reject("EWMA span must be at least 1");
    }
    let a = ewma_alpha(span);
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let s = match out.last() {
            None => x,
            Some(&prev) => prev + a * (x - prev),
        };
        out.push(s);
    }
    Ok(out)
}

/// Which data an external-model loss was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalMode {
    OnPolicy,
    RandomAgent,
}

impl EvalMode {
    pub const ALL: [EvalMode; 2] = [EvalMode::OnPolicy, EvalMode::RandomAgent];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::OnPolicy => "on_policy",
            EvalMode::RandomAgent => "random_agent",
        }
    }
}

/// A per-rollout loss series indexed by global step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    pub steps: Vec<u64>,
    pub raw: Vec<f64>,
}

impl MetricSeries {
    pub fn push(&mut self, step: u64, value: f64) -> Result<()> {
        if self.steps.last().is_some_and(|&s| s >= step) {
            return Err(Error::Invariant(format!("metric steps must increase, got {step}")));
        }
        self.steps.push(step);
        self.raw.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// EWMA restarted after the transfer, so post-transfer values never carry pre-transfer losses.
    pub fn smoothed(&self, span: usize, transfer_step: u64) -> Result<Vec<f64>> {
        let split = self.steps.partition_point(|&s| s <= transfer_step);
        let mut out = ewma_smooth(&self.raw[..split], span)?;
        out.extend(ewma_smooth(&self.raw[split..], span)?);
        Ok(out)
    }
}

/// Steps after the transfer until the smoothed loss first reaches a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Efficiency {
    Reached(u64),
    NotReached,
}

impl Efficiency {
    /// Numeric value with "not reached" censored at `horizon`.
    pub fn censored(self, horizon: u64) -> u64 {
        match self {
            Efficiency::Reached(s) => s.min(horizon),
            Efficiency::NotReached => horizon,
        }
    }
}

pub fn adaptive_efficiency(steps: &[u64], smoothed: &[f64], transfer_step: u64, threshold: f64) -> Efficiency {
    steps
        .iter()
        .zip(smoothed)
        .find(|&(&s, &v)| s > transfer_step && v <= threshold)
        .map_or(Efficiency::NotReached, |(&s, _)| Efficiency::Reached(s - transfer_step))
}

/// Minimum smoothed value strictly after the transfer; `None` without post-transfer points.
pub fn adaptive_performance(steps: &[u64], smoothed: &[f64], transfer_step: u64) -> Option<f64> {
    steps
        .iter()
        .zip(smoothed)
        .filter(|&(&s, _)| s > transfer_step)
        .map(|(_, &v)| v)
        .reduce(f64::min)
}

/// Interquartile mean: drops `floor(n / 4)` values from each end of the sorted input.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return reject("IQM of an empty list");
    }
    if values.iter().any(|v| v.is_nan()) {
        return reject("IQM input contains NaN");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = v.len() / 4;
    let kept = &v[cut..v.len() - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Whether a run's smoothed reward over its final tenth of post-transfer points has IQM ≥ threshold.
pub fn is_converged(steps: &[u64], smoothed_reward: &[f64], transfer_step: u64, threshold: f64) -> bool {
    let post: Vec<f64> = steps
        .iter()
        .zip(smoothed_reward)
        .filter(|&(&s, _)| s > transfer_step)
        .map(|(_, &v)| v)
        .collect();
    if post.is_empty() {
        return false;
    }
    let tail = post.len().div_ceil(10);
    iqm(&post[post.len() - tail..]).is_ok_and(|m| m >= threshold)
}

/// Reward trace of one run, as needed for convergence filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTrace {
    pub steps: Vec<u64>,
    pub smoothed_reward: Vec<f64>,
    pub transfer_step: u64,
}

/// Keeps the runs that learned the task; errors if none did.
pub fn filter_converged<T>(runs: &[T], threshold: f64, trace: impl Fn(&T) -> &RewardTrace) -> Result<Vec<&T>> {
    let kept: Vec<&T> = runs
        .iter()
        .filter(|r| {
            let t = trace(r);
            is_converged(&t.steps, &t.smoothed_reward, t.transfer_step, threshold)
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::NoConvergedRuns(format!("none of {} runs reached reward {threshold}", runs.len())));
    }
    Ok(kept)
}

/// Divides every row's metric by the baseline row's metric.
pub fn normalize_by_baseline(table: &[(String, f64)], baseline: &str) -> Result<Vec<(String, f64)>> {
    let base = table
        .iter()
        .find(|(name, _)| name == baseline)
        .map(|&(_, v)| v)
        .ok_or_else(|| Error::RejectedInput(format!("baseline {baseline} missing from table")))?;
    if base == 0.0 || !base.is_finite() {
        return reject(format!("baseline {baseline} metric {base} cannot normalize"));
    }
    Ok(table.iter().map(|(n, v)| (n.clone(), v / base)).collect())
}

/// Labelled observations from `n_episodes` uniform-random episodes on a copy of `env`.
pub fn random_agent_dataset<S: Scalar>(env: &DoorKeyChange, n_episodes: usize, seed: u64) -> LabeledSet<S> {
    let mut env = env.clone();
    let mut rng = seeded_rng(seed);
    let mut set = LabeledSet::new(OBS_DIM);
    let mut obs = vec![S::zero(); OBS_DIM];
    for _ in 0..n_episodes {
        env.reset(rng.gen());
        loop {
            env.observe_into(&mut obs);
            set.push(&obs, S::lit(env.state().ground_truth().label()));
            let r = env.step(rng.gen_range(0..NUM_ACTIONS)).expect("action in range on a live episode");
            if r.done() {
                break;
            }
        }
    }
    set
}

/// External-model MSE on fresh random-agent episodes; `env` itself is untouched.
pub fn random_agent_eval<S: Scalar>(env: &DoorKeyChange, model: &ExternalModel<S>, n_episodes: usize, seed: u64) -> Result<f64> {
    if n_episodes == 0 {
        return reject("random-agent evaluation needs at least one episode");
    }
    model.evaluate(&random_agent_dataset(env, n_episodes, seed))
}
