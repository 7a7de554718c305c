use super::gae::compute_gae;
use crate::env::GroundTruth;
use crate::Scalar;

/// On-policy data for one rollout, stored step-major: entry `t * num_envs + e`.
#[derive(Debug, Clone)]
pub struct RolloutBatch<S> {
    pub n_steps: usize,
    pub num_envs: usize,
    pub obs_dim: usize,
    pub obs: Vec<S>,
    pub skills: Vec<Option<usize>>,
    /// Policy conditioning vector shared by the whole rollout (empty when unused).
    pub embedding: Vec<S>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<S>,
    pub values: Vec<S>,
    pub extrinsic_rewards: Vec<S>,
    pub intrinsic_rewards: Vec<S>,
    /// `gamma * V(final state)` added on time-limit truncation.
    pub bootstrap_rewards: Vec<S>,
    pub dones: Vec<bool>,
    pub ground_truth: Vec<Option<GroundTruth>>,
    /// Value of the state after the last step, per environment.
    pub last_values: Vec<S>,
}

/// One environment step as recorded by the collector.
#[derive(Debug, Clone)]
pub struct StepRecord<'a, S> {
    pub obs: &'a [S],
    pub skill: Option<usize>,
    pub action: usize,
    pub log_prob: S,
    pub value: S,
    pub extrinsic_reward: S,
    pub intrinsic_reward: S,
    pub bootstrap_reward: S,
    pub done: bool,
    pub ground_truth: Option<GroundTruth>,
}

impl<S: Scalar> RolloutBatch<S> {
    pub fn new(n_steps: usize, num_envs: usize, obs_dim: usize, embedding: Vec<S>) -> Self {
        let cap = n_steps * num_envs;
        RolloutBatch {
            n_steps,
            num_envs,
            obs_dim,
            obs: Vec::with_capacity(cap * obs_dim),
            skills: Vec::with_capacity(cap),
            embedding,
            actions: Vec::with_capacity(cap),
            log_probs: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            extrinsic_rewards: Vec::with_capacity(cap),
            intrinsic_rewards: Vec::with_capacity(cap),
            bootstrap_rewards: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
            ground_truth: Vec::with_capacity(cap),
            last_values: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: StepRecord<'_, S>) {
        assert_eq!(rec.obs.len(), self.obs_dim);
        self.obs.extend_from_slice(rec.obs);
        self.skills.push(rec.skill);
        self.actions.push(rec.action);
        self.log_probs.push(rec.log_prob);
        self.values.push(rec.value);
        self.extrinsic_rewards.push(rec.extrinsic_reward);
        self.intrinsic_rewards.push(rec.intrinsic_reward);
        self.bootstrap_rewards.push(rec.bootstrap_reward);
        self.dones.push(rec.done);
        self.ground_truth.push(rec.ground_truth);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.n_steps * self.num_envs && self.last_values.len() == self.num_envs
    }

    pub fn observation(&self, i: usize) -> &[S] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    /// Reward seen by the learner at step `i`.
    pub fn total_reward(&self, i: usize) -> S {
        self.extrinsic_rewards[i] + self.intrinsic_rewards[i] + self.bootstrap_rewards[i]
    }

    /// GAE per environment stream, written back in step-major order.
    pub fn advantages(&self, gamma: S, lambda: S) -> (Vec<S>, Vec<S>) {
        let n = self.len();
        let mut adv = vec![S::zero(); n];
        let mut ret = vec![S::zero(); n];
        for e in 0..self.num_envs {
            let idx: Vec<usize> = (e..n).step_by(self.num_envs).collect();
            let r: Vec<S> = idx.iter().map(|&i| self.total_reward(i)).collect();
            let v: Vec<S> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let boot = self.last_values.get(e).copied().unwrap_or_else(S::zero);
            let (a, rt) = compute_gae(&r, &v, &d, boot, gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                adv[i] = a[k];
                ret[i] = rt[k];
            }
        }
        (adv, ret)
    }

    pub fn check_finite(&self) -> bool {
        self.log_probs.iter().all(|v| v.is_finite())
            && self.extrinsic_rewards.iter().all(|v| v.is_finite())
            && self.intrinsic_rewards.iter().all(|v| v.is_finite())
            && self.bootstrap_rewards.iter().all(|v| v.is_finite())
    }
}
