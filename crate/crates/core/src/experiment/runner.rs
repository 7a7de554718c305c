use super::config::{Algorithm, ExperimentConfig};
use crate::diayn::{diayn_reward, SkillClassifier, SkillPosterior};
use crate::env::{encode, DoorKeyChange, VecEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::external_model::{label_rollout, ExternalModel};
use crate::interest::{view_key, FieldKind, InterestField, JacobianNormField, McDropoutField, RecencyTable, StalenessField};
use crate::metrics::{ewma_alpha, iqm, random_agent_eval};
use crate::nn::{derive_seed, seeded_rng, SeededRng};
use crate::poi::{
    interest_biased_prior, train_embedding_models, update_embedding, PoiEmbedding, SkillPrior,
};
use crate::ppo::{ActorCritic, PpoStats, RolloutBatch, StepRecord};
use crate::sampler::{ObservationSampler, Seeded};
use crate::Scalar;

/// Independent random streams, so that enabling one component never shifts another's draws.
mod stream {
    pub const ENV: u64 = 0;
    pub const POLICY_INIT: u64 = 1;
    pub const MODEL_INIT: u64 = 2;
    pub const CLASSIFIER_INIT: u64 = 3;
    pub const SAMPLER_INIT: u64 = 4;
    pub const EMBEDDING_INIT: u64 = 5;
    pub const ACT: u64 = 10;
    pub const PPO: u64 = 11;
    pub const MODEL_TRAIN: u64 = 12;
    pub const CLASSIFIER_TRAIN: u64 = 13;
    pub const SAMPLER_TRAIN: u64 = 14;
    pub const SKILL: u64 = 15;
    pub const EMBEDDING: u64 = 16;
    pub const EVAL: u64 = 20;
    pub const MC_MASKS: u64 = 21;
}

/// Exponentially weighted average that restarts when told to.
#[derive(Debug, Clone, Copy)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(span: usize) -> Self {
        Ewma { alpha: ewma_alpha(span), value: None }
    }

    pub fn reset(&mut self) {
        self.value = None;
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            None => x,
            Some(prev) => prev + self.alpha * (x - prev),
        };
        self.value = Some(v);
        v
    }
}

/// One line of the per-rollout metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRow {
    pub global_step: u64,
    pub rollout_index: usize,
    pub on_policy_em_loss_raw: f64,
    pub on_policy_em_loss_smoothed: f64,
    pub random_agent_em_loss_raw: f64,
    pub random_agent_em_loss_smoothed: f64,
    pub episode_reward_iqm: f64,
    pub skill_distribution: Vec<f64>,
    pub transfer_fired: bool,
}

/// Training internals recorded alongside each rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub ppo: PpoStats,
    pub external_model_train_loss: f64,
    pub discriminator_loss: f64,
    pub vae_reconstruction: f64,
    pub vae_kl: f64,
    pub embedding_loss: f64,
    pub mean_intrinsic_reward: f64,
    pub episodes: usize,
}

/// All learners and state of a single seeded run.
pub struct Run<S: Scalar> {
    cfg: ExperimentConfig,
    seed: u64,
    venv: VecEnv,
    ac: ActorCritic<S>,
    model: ExternalModel<S>,
    classifier: Option<SkillClassifier<S>>,
    sampler: Option<ObservationSampler<S>>,
    embedding_models: Option<PoiEmbedding<S>>,
    embedding: Vec<S>,
    recency: RecencyTable<u64>,
    obs: Vec<S>,
    skills: Vec<Option<usize>>,
    episode_returns: Vec<f64>,
    rollout_index: usize,
    on_policy_ewma: Ewma,
    random_ewma: Ewma,
    smoothing_restarted: bool,
    rng_act: SeededRng,
    rng_ppo: SeededRng,
    rng_model: SeededRng,
    rng_classifier: SeededRng,
    rng_sampler: SeededRng,
    rng_skill: SeededRng,
    rng_embedding: SeededRng,
}

impl<S: Scalar> Run<S> {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let alg = cfg.algorithm;
        let rng = |s| seeded_rng(derive_seed(seed, s));
        let venv = VecEnv::new(cfg.env, cfg.num_envs, cfg.pre_transfer_steps, derive_seed(seed, stream::ENV))?;
        let w = if alg.uses_skills() { cfg.diayn.num_skills } else { 0 };
        let q = if alg.uses_embedding() { cfg.poi.embedding.embedding_dim } else { 0 };
        let ac = ActorCritic::new(&cfg.ppo, w, q, &mut rng(stream::POLICY_INIT))?;
        let model = ExternalModel::new(&cfg.external_model, &mut rng(stream::MODEL_INIT))?;
        let classifier = alg
            .uses_skills()
            .then(|| SkillClassifier::new(&cfg.diayn, &mut rng(stream::CLASSIFIER_INIT)))
            .transpose()?;
        let sampler = alg
            .uses_sampler()
            .then(|| {
                ObservationSampler::new(
                    cfg.sampler.sampler_kind,
                    &cfg.sampler.vae,
                    cfg.sampler.replay_capacity,
                    &mut rng(stream::SAMPLER_INIT),
                )
            })
            .transpose()?;
        let embedding_models = alg
            .uses_embedding()
            .then(|| PoiEmbedding::new(OBS_DIM, &cfg.poi.embedding, &mut rng(stream::EMBEDDING_INIT)))
            .transpose()?;
        let embedding = embedding_models.as_ref().map_or_else(Vec::new, |m| m.initial_embedding());
        let mut obs = vec![S::zero(); cfg.num_envs * OBS_DIM];
        venv.observe_all(&mut obs);
        let span = cfg.metrics.loss_smooting_ewma_span_in_rollouts;
        let mut run = Run {
            cfg: cfg.clone(),
            seed,
            venv,
            ac,
            model,
            classifier,
            sampler,
            embedding_models,
            embedding,
            recency: RecencyTable::new(),
            obs,
            skills: vec![None; cfg.num_envs],
            episode_returns: vec![0.0; cfg.num_envs],
            rollout_index: 0,
            on_policy_ewma: Ewma::new(span),
            random_ewma: Ewma::new(span),
            smoothing_restarted: false,
            rng_act: rng(stream::ACT),
            rng_ppo: rng(stream::PPO),
            rng_model: rng(stream::MODEL_TRAIN),
            rng_classifier: rng(stream::CLASSIFIER_TRAIN),
            rng_sampler: rng(stream::SAMPLER_TRAIN),
            rng_skill: rng(stream::SKILL),
            rng_embedding: rng(stream::EMBEDDING),
        };
        let mut priors = Vec::new();
        for e in 0..cfg.num_envs {
            run.start_episode(e, &mut priors)?;
        }
        Ok(run)
    }

    pub fn is_finished(&self) -> bool {
        self.venv.global_step() >= self.cfg.total_steps()
    }

    pub fn global_step(&self) -> u64 {
        self.venv.global_step()
    }

    pub fn external_model(&self) -> &ExternalModel<S> {
        &self.model
    }

    pub fn policy(&self) -> &ActorCritic<S> {
        &self.ac
    }

    fn mask_seed(&self) -> u64 {
        derive_seed(derive_seed(self.seed, stream::MC_MASKS), self.rollout_index as u64)
    }

    /// The configured interest field over the current model snapshot.
    fn field(&self) -> Result<Box<dyn InterestField<S> + '_>> {
        Ok(match self.cfg.poi.interest_field {
            FieldKind::McDropout => {
                Box::new(McDropoutField::new(&self.model, self.cfg.poi.num_mc_dropout_samples, self.mask_seed())?)
            }
            FieldKind::JacobianNorm => Box::new(JacobianNormField::new(&self.model)),
            FieldKind::Staleness => Box::new(StalenessField::new(&self.recency, self.venv.global_step())),
        })
    }

    /// Picks the skill for a new episode in environment `e` and records the prior used.
    fn start_episode(&mut self, e: usize, priors: &mut Vec<Vec<f64>>) -> Result<()> {
        let w = self.cfg.diayn.num_skills;
        let prior = match self.cfg.algorithm {
            Algorithm::Diayn => SkillPrior::uniform(w),
            Algorithm::PoiDiayn => self.interest_prior()?,
            _ => return Ok(()),
        };
        self.skills[e] = Some(prior.sample(&mut self.rng_skill));
        priors.push(prior.probs().to_vec());
        Ok(())
    }

    fn interest_prior(&mut self) -> Result<SkillPrior> {
        let w = self.cfg.diayn.num_skills;
        let (eta, s) = (self.cfg.poi.eta, self.cfg.poi.num_samples_for_poi_calc);
        let mut rng = std::mem::replace(&mut self.rng_skill, seeded_rng(0));
        let result = {
            let field = self.field()?;
            let classifier = self.classifier.as_ref().expect("skills enabled");
            let sampler = self.sampler.as_ref().expect("sampler enabled");
            let mut source = Seeded { sampler, rng: &mut rng };
            interest_biased_prior(field.as_ref(), &mut source, classifier, eta, s)
        };
        self.rng_skill = rng;
        match result {
            Err(Error::SamplerNotReady) => Ok(SkillPrior::uniform(w)),
            other => other,
        }
    }

    /// Collects one rollout, updates every learner, evaluates, and returns the metrics row.
    pub fn step_rollout(&mut self) -> Result<(RolloutRow, Diagnostics)> {
        let k = self.cfg.num_envs;
        let n_steps = self.cfg.ppo.n_steps;
        let alg = self.cfg.algorithm;
        let mut batch = RolloutBatch::new(n_steps, k, OBS_DIM, self.embedding.clone());
        let mut finished_returns = Vec::new();
        let mut priors = Vec::new();
        let mut intrinsic_total = 0.0;
        let mut next = vec![S::zero(); k * OBS_DIM];
        let gamma = S::lit(self.cfg.ppo.gamma);
        for _ in 0..n_steps {
            let truths: Vec<_> = (0..k).map(|e| self.venv.state(e).ground_truth()).collect();
            let outs = self.ac.act_batch(&self.obs, &self.skills, &self.embedding, false, &mut self.rng_act)?;
            let actions: Vec<usize> = outs.iter().map(|o| o.action).collect();
            let steps = self.venv.step(&actions)?;
            self.venv.observe_all(&mut next);
            // Observation each action led to, before any automatic reset.
            let mut landed = next.clone();
            for (e, st) in steps.iter().enumerate() {
                if let Some(fin) = &st.final_state {
                    landed[e * OBS_DIM..(e + 1) * OBS_DIM].copy_from_slice(&encode::<S>(fin));
                }
            }
            let intrinsic = self.intrinsic_rewards(&landed)?;
            let step_now = self.venv.global_step();
            for e in 0..k {
                let st = &steps[e];
                let row = &self.obs[e * OBS_DIM..(e + 1) * OBS_DIM];
                if self.cfg.poi.interest_field == FieldKind::Staleness && alg != Algorithm::Ppo && alg != Algorithm::Diayn {
                    self.recency.touch(view_key(row), step_now);
                }
                let mut bootstrap = S::zero();
                if st.result.truncated {
                    let v = self.ac.values(&landed[e * OBS_DIM..(e + 1) * OBS_DIM], &self.skills[e..=e], &self.embedding)?;
                    bootstrap = gamma * v[0];
                }
                intrinsic_total += intrinsic[e].as_f64();
                batch.push(StepRecord {
                    obs: row,
                    skill: self.skills[e],
                    action: outs[e].action,
                    log_prob: outs[e].log_prob,
                    value: outs[e].value,
                    extrinsic_reward: S::lit(st.result.reward),
                    intrinsic_reward: intrinsic[e],
                    bootstrap_reward: bootstrap,
                    done: st.result.done(),
                    ground_truth: Some(truths[e]),
                });
                self.episode_returns[e] += st.result.reward;
            }
            for (e, st) in steps.iter().enumerate() {
                if st.result.done() {
                    finished_returns.push(std::mem::take(&mut self.episode_returns[e]));
                    self.start_episode(e, &mut priors)?;
                }
            }
            std::mem::swap(&mut self.obs, &mut next);
        }
        batch.last_values = self.ac.values(&self.obs, &self.skills, &self.embedding)?;
        self.finish_rollout(batch, finished_returns, priors, intrinsic_total)
    }

    fn intrinsic_rewards(&self, landed: &[S]) -> Result<Vec<S>> {
        let k = self.cfg.num_envs;
        match self.cfg.algorithm {
            Algorithm::Diayn | Algorithm::PoiDiayn => {
                let q = self.classifier.as_ref().expect("skills enabled").posterior_batch(landed, k)?;
                let w = self.cfg.diayn.num_skills;
                Ok((0..k)
                    .map(|e| {
                        let z = self.skills[e].expect("skill assigned");
                        diayn_reward(q[e * w + z], w, self.cfg.diayn.beta)
                    })
                    .collect())
            }
            Algorithm::PoiIr | Algorithm::PoiIrEmbedding => {
                let scale = S::lit(self.cfg.poi.intrinsic_reward_scale);
                Ok(self.field()?.interest_batch(landed, k)?.into_iter().map(|v| v * scale).collect())
            }
            Algorithm::Ppo => Ok(vec![S::zero(); k]),
        }
    }

    fn finish_rollout(
        &mut self,
        batch: RolloutBatch<S>,
        finished_returns: Vec<f64>,
        priors: Vec<Vec<f64>>,
        intrinsic_total: f64,
    ) -> Result<(RolloutRow, Diagnostics)> {
        let mut diag = Diagnostics {
            episodes: finished_returns.len(),
            mean_intrinsic_reward: intrinsic_total / batch.len() as f64,
            ..Default::default()
        };
        let labelled = label_rollout(&batch)?;
        let on_policy = self.model.evaluate(&labelled)?;
        let epochs = self.cfg.external_model.epochs_per_rollout;
        diag.external_model_train_loss =
            self.model.train_epochs(&labelled, epochs, &mut self.rng_model)?.last().copied().unwrap_or(f64::NAN);
        diag.ppo = self.ac.update(&batch, &self.cfg.ppo, &mut self.rng_ppo)?;
        if let Some(c) = &mut self.classifier {
            let skills: Vec<usize> = batch.skills.iter().map(|z| z.expect("skill recorded")).collect();
            diag.discriminator_loss = c.train(&batch.obs, &skills, &mut self.rng_classifier)?;
        }
        if let Some(s) = &mut self.sampler {
            if let Some(l) = s.observe_rollout(&batch.obs, batch.len(), &mut self.rng_sampler)? {
                diag.vae_reconstruction = l.reconstruction;
                diag.vae_kl = l.kl;
            }
        }
        if self.embedding_models.is_some() {
            diag.embedding_loss = self.refresh_embedding()?;
        }

        let eval_seed = derive_seed(derive_seed(self.seed, stream::EVAL), self.rollout_index as u64);
        let eval_env: &DoorKeyChange = self.venv.env(0);
        let random = random_agent_eval(eval_env, &self.model, self.cfg.metrics.random_agent_eval_episodes, eval_seed)?;

        let fired = self.venv.transfer_fired();
        // Same split as `MetricSeries::smoothed`: the first row past the transfer starts a fresh average.
        if self.venv.global_step() > self.cfg.pre_transfer_steps && !self.smoothing_restarted {
            self.on_policy_ewma.reset();
            self.random_ewma.reset();
            self.smoothing_restarted = true;
        }
        let w = self.cfg.diayn.num_skills;
        let mut dist = vec![0.0; w];
        for p in &priors {
            dist.iter_mut().zip(p).for_each(|(d, v)| *d += v / priors.len() as f64);
        }
        let row = RolloutRow {
            global_step: self.venv.global_step(),
            rollout_index: self.rollout_index,
            on_policy_em_loss_raw: on_policy,
            on_policy_em_loss_smoothed: self.on_policy_ewma.update(on_policy),
            random_agent_em_loss_raw: random,
            random_agent_em_loss_smoothed: self.random_ewma.update(random),
            episode_reward_iqm: if finished_returns.is_empty() { 0.0 } else { iqm(&finished_returns)? },
            skill_distribution: dist,
            transfer_fired: fired,
        };
        self.rollout_index += 1;
        Ok((row, diag))
    }

    fn refresh_embedding(&mut self) -> Result<f64> {
        let p = &self.cfg.poi;
        let (s, s_e, k) = (p.num_samples_for_poi_calc, p.embedding.eval_samples, p.embedding.embedding_update_iters);
        let mut models = self.embedding_models.take().expect("embedding enabled");
        let mut rng = std::mem::replace(&mut self.rng_embedding, seeded_rng(0));
        let result = (|| {
            let field = self.field()?;
            let sampler = self.sampler.as_ref().expect("sampler enabled");
            let mut source = Seeded { sampler, rng: &mut rng };
            let loss = train_embedding_models(&mut models, &self.embedding, &mut source, field.as_ref(), s, s_e)?;
            let e = update_embedding(&models, &self.embedding, &mut source, field.as_ref(), s, k)?;
            Ok::<_, Error>((loss, e))
        })();
        self.embedding_models = Some(models);
        self.rng_embedding = rng;
        let (loss, e) = result?;
        self.embedding = e;
        Ok(loss)
    }
}

/// Runs one seed to completion, handing every rollout to `sink`.
pub fn run_seed<S: Scalar>(
    cfg: &ExperimentConfig,
    seed: u64,
    mut sink: impl FnMut(&RolloutRow, &Diagnostics) -> Result<()>,
) -> Result<()> {
    let mut run = Run::<S>::new(cfg, seed)?;
    while !run.is_finished() {
        let (row, diag) = run.step_rollout()?;
        log::debug!(
            "{} seed {} step {} reward {:.3} on-policy {:.4} random {:.4}",
            cfg.algorithm,
            seed,
            row.global_step,
            row.episode_reward_iqm,
            row.on_policy_em_loss_raw,
            row.random_agent_em_loss_raw
        );
        sink(&row, &diag)?;
    }
    Ok(())
}
