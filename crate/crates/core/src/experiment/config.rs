use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::diayn::DiaynConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::external_model::ExternalModelConfig;
use crate::interest::FieldKind;
use crate::nn::Activation;
use crate::poi::EmbeddingConfig;
use crate::ppo::PpoConfig;
use crate::sampler::{SamplerKind, VaeConfig};

/// Which learner and influence mechanism a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Ppo,
    Diayn,
    PoiDiayn,
    PoiIrEmbedding,
    PoiIr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Ppo, Algorithm::Diayn, Algorithm::PoiDiayn, Algorithm::PoiIrEmbedding, Algorithm::PoiIr];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Diayn => "diayn",
            Algorithm::PoiDiayn => "poi_diayn",
            Algorithm::PoiIrEmbedding => "poi_ir_embedding",
            Algorithm::PoiIr => "poi_ir",
        }
    }

    /// Episodes are conditioned on a discrete skill trained with a discriminator.
    pub fn uses_skills(self) -> bool {
        matches!(self, Algorithm::Diayn | Algorithm::PoiDiayn)
    }

    /// Interest is added to the reward at every step.
    pub fn uses_interest_reward(self) -> bool {
        matches!(self, Algorithm::PoiIr | Algorithm::PoiIrEmbedding)
    }

    pub fn uses_embedding(self) -> bool {
        self == Algorithm::PoiIrEmbedding
    }

    /// Needs observation samples for interest queries.
    pub fn uses_sampler(self) -> bool {
        matches!(self, Algorithm::PoiDiayn | Algorithm::PoiIrEmbedding)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiConfig {
    pub eta: f64,
    pub num_samples_for_poi_calc: usize,
    pub interest_field: FieldKind,
    pub num_mc_dropout_samples: usize,
    pub intrinsic_reward_scale: f64,
    pub embedding: EmbeddingConfig,
}

impl Default for PoiConfig {
    fn default() -> Self {
        PoiConfig {
            eta: 0.0,
            num_samples_for_poi_calc: 1000,
            interest_field: FieldKind::McDropout,
            num_mc_dropout_samples: 30,
            intrinsic_reward_scale: 1.0,
            embedding: EmbeddingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub sampler_kind: SamplerKind,
    pub replay_capacity: usize,
    pub vae: VaeConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { sampler_kind: SamplerKind::Vae, replay_capacity: 8192, vae: VaeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub loss_smooting_ewma_span_in_rollouts: usize,
    pub reward_ewma_span_in_rollouts: usize,
    pub on_policy_loss_convergence_threshold: f64,
    pub random_agent_loss_convergence_threshold: f64,
    pub convergence_reward_threshold: f64,
    pub random_agent_eval_episodes: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            loss_smooting_ewma_span_in_rollouts: 30,
            reward_ewma_span_in_rollouts: 10,
            on_policy_loss_convergence_threshold: 0.001,
            random_agent_loss_convergence_threshold: 0.5,
            convergence_reward_threshold: 0.5,
            random_agent_eval_episodes: 10,
        }
    }
}

/// Everything a run needs; parsed from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub num_envs: usize,
    pub env: EnvConfig,
    pub pre_transfer_steps: u64,
    pub post_transfer_steps: u64,
    pub ppo: PpoConfig,
    pub external_model: ExternalModelConfig,
    pub diayn: DiaynConfig,
    pub poi: PoiConfig,
    pub sampler: SamplerConfig,
    pub metrics: MetricsConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// The desk-scale profile.
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Ppo,
            seeds: vec![0, 1, 2, 3, 4],
            num_envs: 1,
            env: EnvConfig::new(8),
            pre_transfer_steps: 300_000,
            post_transfer_steps: 300_000,
            ppo: PpoConfig::default(),
            external_model: ExternalModelConfig::default(),
            diayn: DiaynConfig::default(),
            poi: PoiConfig::default(),
            sampler: SamplerConfig::default(),
            metrics: MetricsConfig::default(),
            output_dir: None,
        }
    }
}

/// Every accepted key, fully qualified as `section.name`.
pub const KEYS: &[&str] = &[
    "experiment.algorithm",
    "experiment.seeds",
    "experiment.num_envs",
    "experiment.output_dir",
    "doorkeychange.grid_size",
    "doorkeychange.max_steps",
    "doorkeychange.pre_transfer_steps",
    "doorkeychange.post_transfer_steps",
    "ppo.learning_rate",
    "ppo.n_steps",
    "ppo.batch_size",
    "ppo.n_epochs",
    "ppo.gamma",
    "ppo.gae_lambda",
    "ppo.clip_range",
    "ppo.ent_coef",
    "ppo.vf_coef",
    "ppo.max_grad_norm",
    "ppo.policy_layers_sizes",
    "ppo.value_layers_sizes",
    "external_model.layer_sizes",
    "external_model.layer_activations",
    "external_model.dropout_p",
    "external_model.num_mc_dropout_samples",
    "external_model.batch_size",
    "external_model.learning_rate",
    "external_model.epochs_per_rollout",
    "diayn.num_skills",
    "diayn.beta",
    "diayn.discriminator_layer_sizes",
    "diayn.final_discriminator_activation",
    "diayn.other_activations",
    "diayn.discriminator_batch_size",
    "diayn.discriminator_learning_rate",
    "poi.num_samples_for_poi_calc",
    "poi.eta",
    "poi.interest_field",
    "poi.intrinsic_reward_scale",
    "poi.embedding_dim",
    "poi.embedding_update_iters",
    "poi.eval_samples",
    "poi.embedding_learning_rate",
    "sampler.sampler_kind",
    "sampler.replay_capacity",
    "sampler.latent_dim",
    "sampler.encoder_layer_sizes",
    "sampler.decoder_layer_sizes",
    "sampler.final_decoder_activation",
    "sampler.other_activations",
    "sampler.learning_rate",
    "sampler.batch_size",
    "metrics.loss_smooting_ewma_span_in_rollouts",
    "metrics.reward_ewma_span_in_rollouts",
    "metrics.on_policy_loss_convergence_threshold",
    "metrics.random_agent_loss_convergence_threshold",
    "metrics.convergence_reward_threshold",
    "metrics.random_agent_eval_episodes",
];

/// Resolves a possibly bare key to its qualified form; bare keys must be unambiguous.
pub fn qualify(key: &str) -> Result<&'static str> {
    if let Some(k) = KEYS.iter().find(|k| **k == key) {
        return Ok(k);
    }
    let matches: Vec<&'static str> =
        KEYS.iter().copied().filter(|k| k.split_once('.').map(|(_, n)| n) == Some(key)).collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Config(format!("unknown config key {key:?}"))),
        many => Err(Error::Config(format!("ambiguous config key {key:?}; use one of {}", many.join(", ")))),
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Config(format!("{key}: expected a [list], got {v:?}")))?;
    inner.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn list<T: Display>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(T::to_string).collect();
    format!("[{}]", items.join(", "))
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut max_steps_set = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            let key = qualify(k.trim())?;
            max_steps_set |= key == "doorkeychange.max_steps";
            cfg.set(key, v.trim())?;
        }
        if !max_steps_set {
            cfg.env.max_steps = EnvConfig::new(cfg.env.grid_size).max_steps;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one qualified key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key;
        match key {
            "experiment.algorithm" => self.algorithm = parse(k, v)?,
            "experiment.seeds" => self.seeds = parse_list(k, v)?,
            "experiment.num_envs" => self.num_envs = parse(k, v)?,
            "experiment.output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "doorkeychange.grid_size" => self.env.grid_size = parse(k, v)?,
            "doorkeychange.max_steps" => self.env.max_steps = parse(k, v)?,
            "doorkeychange.pre_transfer_steps" => self.pre_transfer_steps = parse(k, v)?,
            "doorkeychange.post_transfer_steps" => self.post_transfer_steps = parse(k, v)?,
            "ppo.learning_rate" => self.ppo.learning_rate = parse(k, v)?,
            "ppo.n_steps" => self.ppo.n_steps = parse(k, v)?,
            "ppo.batch_size" => self.ppo.batch_size = parse(k, v)?,
            "ppo.n_epochs" => self.ppo.n_epochs = parse(k, v)?,
            "ppo.gamma" => self.ppo.gamma = parse(k, v)?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse(k, v)?,
            "ppo.clip_range" => self.ppo.clip_range = parse(k, v)?,
            "ppo.ent_coef" => self.ppo.ent_coef = parse(k, v)?,
            "ppo.vf_coef" => self.ppo.vf_coef = parse(k, v)?,
            "ppo.max_grad_norm" => self.ppo.max_grad_norm = parse(k, v)?,
            "ppo.policy_layers_sizes" => self.ppo.policy_layers_sizes = parse_list(k, v)?,
            "ppo.value_layers_sizes" => self.ppo.value_layers_sizes = parse_list(k, v)?,
            "external_model.layer_sizes" => self.external_model.layer_sizes = parse_list(k, v)?,
            "external_model.layer_activations" => self.external_model.layer_activations = parse(k, v)?,
            "external_model.dropout_p" => self.external_model.dropout_p = parse(k, v)?,
            "external_model.num_mc_dropout_samples" => self.poi.num_mc_dropout_samples = parse(k, v)?,
            "external_model.batch_size" => self.external_model.batch_size = parse(k, v)?,
            "external_model.learning_rate" => self.external_model.learning_rate = parse(k, v)?,
            "external_model.epochs_per_rollout" => self.external_model.epochs_per_rollout = parse(k, v)?,
            "diayn.num_skills" => self.diayn.num_skills = parse(k, v)?,
            "diayn.beta" => self.diayn.beta = parse(k, v)?,
            "diayn.discriminator_layer_sizes" => self.diayn.discriminator_layer_sizes = parse_list(k, v)?,
            "diayn.final_discriminator_activation" => self.diayn.final_discriminator_activation = parse(k, v)?,
            "diayn.other_activations" => self.diayn.other_activations = parse(k, v)?,
            "diayn.discriminator_batch_size" => self.diayn.discriminator_batch_size = parse(k, v)?,
            "diayn.discriminator_learning_rate" => self.diayn.discriminator_learning_rate = parse(k, v)?,
            "poi.num_samples_for_poi_calc" => self.poi.num_samples_for_poi_calc = parse(k, v)?,
            "poi.eta" => self.poi.eta = parse(k, v)?,
            "poi.interest_field" => self.poi.interest_field = parse(k, v)?,
            "poi.intrinsic_reward_scale" => self.poi.intrinsic_reward_scale = parse(k, v)?,
            "poi.embedding_dim" => self.poi.embedding.embedding_dim = parse(k, v)?,
            "poi.embedding_update_iters" => self.poi.embedding.embedding_update_iters = parse(k, v)?,
            "poi.eval_samples" => self.poi.embedding.eval_samples = parse(k, v)?,
            "poi.embedding_learning_rate" => self.poi.embedding.learning_rate = parse(k, v)?,
            "sampler.sampler_kind" => self.sampler.sampler_kind = parse(k, v)?,
            "sampler.replay_capacity" => self.sampler.replay_capacity = parse(k, v)?,
            "sampler.latent_dim" => self.sampler.vae.latent_dim = parse(k, v)?,
            "sampler.encoder_layer_sizes" => self.sampler.vae.encoder_layer_sizes = parse_list(k, v)?,
            "sampler.decoder_layer_sizes" => self.sampler.vae.decoder_layer_sizes = parse_list(k, v)?,
            "sampler.final_decoder_activation" => self.sampler.vae.final_decoder_activation = parse(k, v)?,
            "sampler.other_activations" => self.sampler.vae.other_activations = parse(k, v)?,
            "sampler.learning_rate" => self.sampler.vae.learning_rate = parse(k, v)?,
            "sampler.batch_size" => self.sampler.vae.batch_size = parse(k, v)?,
            "metrics.loss_smooting_ewma_span_in_rollouts" => self.metrics.loss_smooting_ewma_span_in_rollouts = parse(k, v)?,
            "metrics.reward_ewma_span_in_rollouts" => self.metrics.reward_ewma_span_in_rollouts = parse(k, v)?,
            "metrics.on_policy_loss_convergence_threshold" => {
                self.metrics.on_policy_loss_convergence_threshold = parse(k, v)?
            }
            "metrics.random_agent_loss_convergence_threshold" => {
                self.metrics.random_agent_loss_convergence_threshold = parse(k, v)?
            }
            "metrics.convergence_reward_threshold" => self.metrics.convergence_reward_threshold = parse(k, v)?,
            "metrics.random_agent_eval_episodes" => self.metrics.random_agent_eval_episodes = parse(k, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().filter_map(|&k| self.get(k).map(|v| (k, v))).collect()
    }

    fn get(&self, key: &str) -> Option<String> {
        let act = |a: Activation| a.to_string();
        Some(match key {
            "experiment.algorithm" => self.algorithm.to_string(),
            "experiment.seeds" => list(&self.seeds),
            "experiment.num_envs" => self.num_envs.to_string(),
            "experiment.output_dir" => return self.output_dir.as_ref().map(|p| p.display().to_string()),
            "doorkeychange.grid_size" => self.env.grid_size.to_string(),
            "doorkeychange.max_steps" => self.env.max_steps.to_string(),
            "doorkeychange.pre_transfer_steps" => self.pre_transfer_steps.to_string(),
            "doorkeychange.post_transfer_steps" => self.post_transfer_steps.to_string(),
            "ppo.learning_rate" => self.ppo.learning_rate.to_string(),
            "ppo.n_steps" => self.ppo.n_steps.to_string(),
            "ppo.batch_size" => self.ppo.batch_size.to_string(),
            "ppo.n_epochs" => self.ppo.n_epochs.to_string(),
            "ppo.gamma" => self.ppo.gamma.to_string(),
            "ppo.gae_lambda" => self.ppo.gae_lambda.to_string(),
            "ppo.clip_range" => self.ppo.clip_range.to_string(),
            "ppo.ent_coef" => self.ppo.ent_coef.to_string(),
            "ppo.vf_coef" => self.ppo.vf_coef.to_string(),
            "ppo.max_grad_norm" => self.ppo.max_grad_norm.to_string(),
            "ppo.policy_layers_sizes" => list(&self.ppo.policy_layers_sizes),
            "ppo.value_layers_sizes" => list(&self.ppo.value_layers_sizes),
            "external_model.layer_sizes" => list(&self.external_model.layer_sizes),
            "external_model.layer_activations" => act(self.external_model.layer_activations),
            "external_model.dropout_p" => self.external_model.dropout_p.to_string(),
            "external_model.num_mc_dropout_samples" => self.poi.num_mc_dropout_samples.to_string(),
            "external_model.batch_size" => self.external_model.batch_size.to_string(),
            "external_model.learning_rate" => self.external_model.learning_rate.to_string(),
            "external_model.epochs_per_rollout" => self.external_model.epochs_per_rollout.to_string(),
            "diayn.num_skills" => self.diayn.num_skills.to_string(),
            "diayn.beta" => self.diayn.beta.to_string(),
            "diayn.discriminator_layer_sizes" => list(&self.diayn.discriminator_layer_sizes),
            "diayn.final_discriminator_activation" => act(self.diayn.final_discriminator_activation),
            "diayn.other_activations" => act(self.diayn.other_activations),
            "diayn.discriminator_batch_size" => self.diayn.discriminator_batch_size.to_string(),
            "diayn.discriminator_learning_rate" => self.diayn.discriminator_learning_rate.to_string(),
            "poi.num_samples_for_poi_calc" => self.poi.num_samples_for_poi_calc.to_string(),
            "poi.eta" => self.poi.eta.to_string(),
            "poi.interest_field" => self.poi.interest_field.to_string(),
            "poi.intrinsic_reward_scale" => self.poi.intrinsic_reward_scale.to_string(),
            "poi.embedding_dim" => self.poi.embedding.embedding_dim.to_string(),
            "poi.embedding_update_iters" => self.poi.embedding.embedding_update_iters.to_string(),
            "poi.eval_samples" => self.poi.embedding.eval_samples.to_string(),
            "poi.embedding_learning_rate" => self.poi.embedding.learning_rate.to_string(),
            "sampler.sampler_kind" => self.sampler.sampler_kind.to_string(),
            "sampler.replay_capacity" => self.sampler.replay_capacity.to_string(),
            "sampler.latent_dim" => self.sampler.vae.latent_dim.to_string(),
            "sampler.encoder_layer_sizes" => list(&self.sampler.vae.encoder_layer_sizes),
            "sampler.decoder_layer_sizes" => list(&self.sampler.vae.decoder_layer_sizes),
            "sampler.final_decoder_activation" => act(self.sampler.vae.final_decoder_activation),
            "sampler.other_activations" => act(self.sampler.vae.other_activations),
            "sampler.learning_rate" => self.sampler.vae.learning_rate.to_string(),
            "sampler.batch_size" => self.sampler.vae.batch_size.to_string(),
            "metrics.loss_smooting_ewma_span_in_rollouts" => self.metrics.loss_smooting_ewma_span_in_rollouts.to_string(),
            "metrics.reward_ewma_span_in_rollouts" => self.metrics.reward_ewma_span_in_rollouts.to_string(),
            "metrics.on_policy_loss_convergence_threshold" => {
                self.metrics.on_policy_loss_convergence_threshold.to_string()
            }
            "metrics.random_agent_loss_convergence_threshold" => {
                self.metrics.random_agent_loss_convergence_threshold.to_string()
            }
            "metrics.convergence_reward_threshold" => self.metrics.convergence_reward_threshold.to_string(),
            "metrics.random_agent_eval_episodes" => self.metrics.random_agent_eval_episodes.to_string(),
            _ => return None,
        })
    }

    /// The resolved configuration in the same `key = value` format it is parsed from.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hash of everything that influences results; output location and seed list excluded.
    pub fn hash(&self) -> String {
        self.hash_excluding(&["experiment.output_dir", "experiment.seeds"])
    }

    /// Like [`Self::hash`] but also ignoring the algorithm, so runs meant to be compared share it.
    pub fn group_hash(&self) -> String {
        self.hash_excluding(&["experiment.output_dir", "experiment.seeds", "experiment.algorithm"])
    }

    fn hash_excluding(&self, skip: &[&str]) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !skip.contains(&k) {
                h.update(format!("{k}={v}\n"));
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn total_steps(&self) -> u64 {
        self.pre_transfer_steps + self.post_transfer_steps
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.env.validate()?;
        self.ppo.validate()?;
        self.external_model.validate()?;
        self.diayn.validate()?;
        self.sampler.vae.validate()?;
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.num_envs == 0 {
            return fail("num_envs must be positive".into());
        }
        if self.pre_transfer_steps == 0 || self.post_transfer_steps == 0 {
            return fail("pre_transfer_steps and post_transfer_steps must be positive".into());
        }
        let obs = crate::env::OBS_DIM;
        for (name, sizes) in [
            ("ppo.policy_layers_sizes", &self.ppo.policy_layers_sizes),
            ("ppo.value_layers_sizes", &self.ppo.value_layers_sizes),
            ("external_model.layer_sizes", &self.external_model.layer_sizes),
            ("diayn.discriminator_layer_sizes", &self.diayn.discriminator_layer_sizes),
            ("sampler.encoder_layer_sizes", &self.sampler.vae.encoder_layer_sizes),
        ] {
            if sizes.first() != Some(&obs) {
                return fail(format!("{name} must start with the observation size {obs}"));
            }
        }
        if self.sampler.vae.decoder_layer_sizes.last() != Some(&obs) {
            return fail(format!("sampler.decoder_layer_sizes must end with {obs}"));
        }
        if self.ppo.policy_layers_sizes.last() != Some(&crate::env::NUM_ACTIONS) {
            return fail(format!("ppo.policy_layers_sizes must end with {}", crate::env::NUM_ACTIONS));
        }
        if self.ppo.value_layers_sizes.last() != Some(&1) {
            return fail("ppo.value_layers_sizes must end with 1".into());
        }
        if !(0.0..=1.0).contains(&self.poi.eta) {
            return fail(format!("poi.eta {} outside [0, 1]", self.poi.eta));
        }
        if self.poi.num_samples_for_poi_calc == 0 {
            return fail("poi.num_samples_for_poi_calc must be at least 1".into());
        }
        if self.poi.num_mc_dropout_samples < 2 {
            return fail("external_model.num_mc_dropout_samples must be at least 2".into());
        }
        if self.poi.embedding.embedding_update_iters == 0 || self.poi.embedding.embedding_dim == 0 {
            return fail("poi.embedding_dim and poi.embedding_update_iters must be positive".into());
        }
        if self.algorithm.uses_interest_reward() && self.poi.interest_field == FieldKind::JacobianNorm {
            return fail("jacobian_norm is too costly for per-step interest rewards; use it with poi_diayn".into());
        }
        if self.sampler.replay_capacity == 0 {
            return fail("sampler.replay_capacity must be positive".into());
        }
        let m = &self.metrics;
        if m.loss_smooting_ewma_span_in_rollouts == 0 || m.reward_ewma_span_in_rollouts == 0 {
            return fail("EWMA spans must be at least 1".into());
        }
        if m.random_agent_eval_episodes == 0 {
            return fail("metrics.random_agent_eval_episodes must be positive".into());
        }
        Ok(())
    }
}
