use rand::seq::SliceRandom;
use rand::Rng;

use super::config::PpoConfig;
use super::gae::normalize;
use super::rollout::RolloutBatch;
use crate::error::{reject, Error, Result};
use crate::nn::{
    clip_grad_norm, log_softmax, softmax, Activation, Dropout, FeedforwardNet, NetSpec, OptimizerState,
};
use crate::Scalar;

/// Action chosen by [`ActorCritic::act`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutput<S> {
    pub action: usize,
    pub log_prob: S,
    pub value: S,
}

/// Mean losses over all minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Separate policy and value networks whose input is the observation followed by an
/// optional one-hot skill and an optional conditioning embedding.
#[derive(Debug, Clone)]
pub struct ActorCritic<S> {
    pub policy: FeedforwardNet<S>,
    pub value: FeedforwardNet<S>,
    obs_dim: usize,
    num_skills: usize,
    embed_dim: usize,
    policy_opt: OptimizerState<S>,
    value_opt: OptimizerState<S>,
}

impl<S: Scalar> ActorCritic<S> {
    /// `num_skills` / `embed_dim` of zero disable the corresponding inputs.
    pub fn new<R: Rng>(cfg: &PpoConfig, num_skills: usize, embed_dim: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let obs_dim = cfg.policy_layers_sizes[0];
        if cfg.value_layers_sizes[0] != obs_dim {
            return Err(Error::Config("policy and value networks must share the input size".into()));
        }
        let extra = num_skills + embed_dim;
        let mut psizes = cfg.policy_layers_sizes.clone();
        psizes[0] += extra;
        let mut vsizes = cfg.value_layers_sizes.clone();
        vsizes[0] += extra;
        let policy = FeedforwardNet::new(
            &NetSpec::new(psizes, Activation::Relu, Activation::Identity).with_output_gain(0.01),
            rng,
        )?;
        let value = FeedforwardNet::new(&NetSpec::new(vsizes, Activation::Relu, Activation::Identity), rng)?;
        let policy_opt = OptimizerState::adam(cfg.learning_rate, policy.num_params());
        let value_opt = OptimizerState::adam(cfg.learning_rate, value.num_params());
        Ok(ActorCritic { policy, value, obs_dim, num_skills, embed_dim, policy_opt, value_opt })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn num_skills(&self) -> usize {
        self.num_skills
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn num_actions(&self) -> usize {
        self.policy.output_dim()
    }

    /// Concatenates observations with skill one-hots and the embedding, row by row.
    pub fn build_input(&self, obs: &[S], skills: &[Option<usize>], embedding: &[S]) -> Result<Vec<S>> {
        let batch = skills.len();
        if obs.len() != batch * self.obs_dim {
            return reject(format!("expected {batch} observations of size {}", self.obs_dim));
        }
        if embedding.len() != self.embed_dim {
            return Err(Error::Config(format!(
                "embedding of size {} for a policy conditioned on {}",
                embedding.len(),
                self.embed_dim
            )));
        }
        let width = self.obs_dim + self.num_skills + self.embed_dim;
        let mut x = Vec::with_capacity(batch * width);
        for (row, skill) in obs.chunks(self.obs_dim).zip(skills) {
            x.extend_from_slice(row);
            if self.num_skills > 0 {
                let z = skill.ok_or_else(|| Error::RejectedInput("skill required".into()))?;
                if z >= self.num_skills {
                    return reject(format!("skill {z} outside [0, {})", self.num_skills));
                }
                x.extend((0..self.num_skills).map(|k| if k == z { S::one() } else { S::zero() }));
            }
            x.extend_from_slice(embedding);
        }
        Ok(x)
    }

    /// Action probabilities for a batch, `batch x actions`.
    pub fn action_probs(&self, obs: &[S], skills: &[Option<usize>], embedding: &[S]) -> Result<Vec<S>> {
        let x = self.build_input(obs, skills, embedding)?;
        let mut logits = self.policy.predict_batch(&x, skills.len(), Dropout::Off)?;
        let k = self.num_actions();
        for row in logits.chunks_mut(k) {
            let p = softmax(row)?;
            row.copy_from_slice(&p);
        }
        Ok(logits)
    }

    pub fn values(&self, obs: &[S], skills: &[Option<usize>], embedding: &[S]) -> Result<Vec<S>> {
        let x = self.build_input(obs, skills, embedding)?;
        self.value.predict_batch(&x, skills.len(), Dropout::Off)
    }

    pub fn act<R: Rng>(
        &self,
        obs: &[S],
        skill: Option<usize>,
        embedding: &[S],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<ActOutput<S>> {
        Ok(self.act_batch(obs, &[skill], embedding, deterministic, rng)?[0])
    }

    pub fn act_batch<R: Rng>(
        &self,
        obs: &[S],
        skills: &[Option<usize>],
        embedding: &[S],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<Vec<ActOutput<S>>> {
        let x = self.build_input(obs, skills, embedding)?;
        let batch = skills.len();
        let logits = self.policy.predict_batch(&x, batch, Dropout::Off)?;
        let values = self.value.predict_batch(&x, batch, Dropout::Off)?;
        let k = self.num_actions();
        let mut out = Vec::with_capacity(batch);
        for (row, &value) in logits.chunks(k).zip(&values) {
            let logp = log_softmax(row);
            let action = if deterministic {
                argmax(&logp)
            } else {
                sample_categorical(logp.iter().map(|l| l.exp()), rng)
            };
            out.push(ActOutput { action, log_prob: logp[action], value });
        }
        Ok(out)
    }

    /// Clipped-surrogate update over `n_epochs` shuffled passes of minibatches.
    pub fn update<R: Rng>(&mut self, batch: &RolloutBatch<S>, cfg: &PpoConfig, rng: &mut R) -> Result<PpoStats> {
        if !batch.check_finite() {
            return Err(Error::NonFinite("rollout batch contains non-finite rewards or log-probs".into()));
        }
        let n = batch.len();
        if n == 0 {
            return reject("empty rollout batch");
        }
        let (advantages, returns) = batch.advantages(S::lit(cfg.gamma), S::lit(cfg.gae_lambda));
        let inputs = self.build_input(&batch.obs, &batch.skills, &batch.embedding)?;
        let width = self.policy.input_dim();
        let k = self.num_actions();
        let mb_size = cfg.batch_size.min(n);
        let clip = S::lit(cfg.clip_range);
        let (ent_coef, vf_coef) = (S::lit(cfg.ent_coef), S::lit(cfg.vf_coef));

        let mut stats = PpoStats::default();
        let mut n_mb = 0usize;
        let mut pgrads = vec![S::zero(); self.policy.num_params()];
        let mut vgrads = vec![S::zero(); self.value.num_params()];
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.n_epochs {
            order.shuffle(rng);
            for mb in order.chunks(mb_size) {
                let m = mb.len();
                let ms = S::from_usize_lossy(m);
                let mut x = Vec::with_capacity(m * width);
                for &i in mb {
                    x.extend_from_slice(&inputs[i * width..(i + 1) * width]);
                }
                let mut adv: Vec<S> = mb.iter().map(|&i| advantages[i]).collect();
                if m > 1 {
                    normalize(&mut adv);
                }

                let ptrace = self.policy.forward_trace(&x, m, Dropout::Off)?;
                let logits = ptrace.output();
                let mut dlogits = vec![S::zero(); m * k];
                let (mut pl, mut ent, mut kl, mut clipped) = (S::zero(), S::zero(), S::zero(), 0usize);
                for (r, &i) in mb.iter().enumerate() {
                    let row = policy_row(
                        &logits[r * k..(r + 1) * k],
                        batch.actions[i],
                        batch.log_probs[i],
                        adv[r],
                        clip,
                    );
                    pl += row.surrogate_loss;
                    ent += row.entropy;
                    kl += row.approx_kl;
                    if row.clipped {
                        clipped += 1;
                    }
                    let out = &mut dlogits[r * k..(r + 1) * k];
                    for j in 0..k {
                        out[j] = (row.d_surrogate[j] - ent_coef * row.d_entropy[j]) / ms;
                    }
                }
                let vtrace = self.value.forward_trace(&x, m, Dropout::Off)?;
                let vpred = vtrace.output();
                let mut dv = vec![S::zero(); m];
                let mut vl = S::zero();
                for (r, &i) in mb.iter().enumerate() {
                    let diff = vpred[r] - returns[i];
                    vl += diff * diff;
                    dv[r] = vf_coef * S::lit(2.0) * diff / ms;
                }
                let (pl, vl, ent) = (pl / ms, vl / ms, ent / ms);
                let loss = pl + vf_coef * vl - ent_coef * ent;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "ppo loss {loss} (policy {pl}, value {vl}, entropy {ent}) on minibatch of {m}: indices {:?}",
                        &mb[..m.min(16)]
                    )));
                }

                pgrads.iter_mut().for_each(|g| *g = S::zero());
                vgrads.iter_mut().for_each(|g| *g = S::zero());
                self.policy.backward(&ptrace, &dlogits, &mut pgrads, false);
                self.value.backward(&vtrace, &dv, &mut vgrads, false);
                let norm = clip_grad_norm(&mut [&mut pgrads[..], &mut vgrads[..]], S::lit(cfg.max_grad_norm));
                self.policy_opt.step(self.policy.params_mut(), &pgrads)?;
                self.value_opt.step(self.value.params_mut(), &vgrads)?;

                stats.policy_loss += pl.as_f64();
                stats.value_loss += vl.as_f64();
                stats.entropy += ent.as_f64();
                stats.approx_kl += (kl / ms).as_f64();
                stats.clip_fraction += clipped as f64 / m as f64;
                stats.grad_norm += norm.as_f64();
                n_mb += 1;
            }
        }
        let d = n_mb.max(1) as f64;
        stats.policy_loss /= d;
        stats.value_loss /= d;
        stats.entropy /= d;
        stats.approx_kl /= d;
        stats.clip_fraction /= d;
        stats.grad_norm /= d;
        Ok(stats)
    }
}

/// Per-sample pieces of the PPO policy objective with their logit gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow<S> {
    /// `-min(r * A, clip(r, 1 - eps, 1 + eps) * A)`
    pub surrogate_loss: S,
    pub d_surrogate: Vec<S>,
    pub entropy: S,
    pub d_entropy: Vec<S>,
    pub ratio: S,
    pub clipped: bool,
    pub approx_kl: S,
}

pub fn policy_row<S: Scalar>(logits: &[S], action: usize, old_log_prob: S, advantage: S, clip: S) -> PolicyRow<S> {
    let logp = log_softmax(logits);
    let probs: Vec<S> = logp.iter().map(|l| l.exp()).collect();
    let log_ratio = logp[action] - old_log_prob;
    let ratio = log_ratio.exp();
    let (surrogate, d_ratio) = clipped_surrogate(ratio, advantage, clip);
    // d(-surrogate)/d logp[a] = -d_ratio * ratio
    let g_logp = -d_ratio * ratio;
    let entropy: S = -probs.iter().zip(&logp).map(|(&p, &l)| p * l).sum::<S>();
    let d_surrogate = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| g_logp * (if j == action { S::one() } else { S::zero() } - p))
        .collect();
    let d_entropy = probs.iter().zip(&logp).map(|(&p, &l)| -p * (l + entropy)).collect();
    PolicyRow {
        surrogate_loss: -surrogate,
        d_surrogate,
        entropy,
        d_entropy,
        ratio,
        clipped: (ratio - S::one()).abs() > clip,
        approx_kl: (ratio - S::one()) - log_ratio,
    }
}

/// `min(r * A, clip(r) * A)` and its derivative with respect to `r`.
pub fn clipped_surrogate<S: Scalar>(ratio: S, advantage: S, clip: S) -> (S, S) {
    let unclipped = ratio * advantage;
    let bounded = ratio.max(S::one() - clip).min(S::one() + clip);
    let clipped = bounded * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, S::zero())
    }
}

pub fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Draws an index with probability proportional to the given weights.
pub fn sample_categorical<S: Scalar, R: Rng>(weights: impl IntoIterator<Item = S>, rng: &mut R) -> usize {
    let w: Vec<f64> = weights.into_iter().map(|v| v.as_f64()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &p) in w.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    w.iter().rposition(|&p| p > 0.0).unwrap_or(w.len() - 1)
}
