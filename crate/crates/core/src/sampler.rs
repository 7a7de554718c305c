//! Observation samplers for interest queries: a variational autoencoder and a replay window.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{reject, Error, Result};
use crate::nn::{sigmoid, Activation, Dropout, FeedforwardNet, NetSpec, OptimizerState};
use crate::Scalar;

/// Probabilities are clamped to `[EPS, 1 - EPS]` when reporting reconstruction loss.
const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Vae,
    Replay,
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vae" => Ok(SamplerKind::Vae),
            "replay" => Ok(SamplerKind::Replay),
            other => Err(Error::Config(format!("unknown sampler_kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerKind::Vae => "vae",
            SamplerKind::Replay => "replay",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub encoder_layer_sizes: Vec<usize>,
    pub decoder_layer_sizes: Vec<usize>,
    pub final_decoder_activation: Activation,
    pub other_activations: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            latent_dim: 32,
            encoder_layer_sizes: vec![980, 200, 100, 64],
            decoder_layer_sizes: vec![32, 100, 100, 980],
            final_decoder_activation: Activation::Sigmoid,
            other_activations: Activation::LeakyRelu,
            learning_rate: 0.001,
            batch_size: 256,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        let enc = &self.encoder_layer_sizes;
        let dec = &self.decoder_layer_sizes;
        if enc.len() < 2 || dec.len() < 2 {
            return Err(Error::Config("encoder and decoder need at least two layer sizes".into()));
        }
        if enc.last() != Some(&(2 * self.latent_dim)) {
            return Err(Error::Config(format!(
                "encoder output {:?} must be twice latent_dim {}",
                enc.last(),
                self.latent_dim
            )));
        }
        if dec[0] != self.latent_dim || dec.last() != enc.first() {
            return Err(Error::Config("decoder must map latent_dim back to the observation size".into()));
        }
        if self.final_decoder_activation != Activation::Sigmoid {
            return Err(Error::Config("final_decoder_activation must be Sigmoid".into()));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config("VAE batch_size and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian-latent autoencoder over observations.
///
/// The decoder network emits logits; [`ObservationVae::decode`] applies the sigmoid, which
/// lets the reconstruction gradient be taken on the logits directly.
#[derive(Debug, Clone)]
pub struct ObservationVae<S> {
    pub encoder: FeedforwardNet<S>,
    pub decoder: FeedforwardNet<S>,
    latent_dim: usize,
    batch_size: usize,
    enc_opt: OptimizerState<S>,
    dec_opt: OptimizerState<S>,
    updates: u64,
}

/// Mean per-sample loss terms of one VAE training pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub reconstruction: f64,
    pub kl: f64,
}

impl<S: Scalar> ObservationVae<S> {
    pub fn new<R: Rng>(cfg: &VaeConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let enc_spec = NetSpec::new(cfg.encoder_layer_sizes.clone(), cfg.other_activations, Activation::Identity);
        let dec_spec = NetSpec::new(cfg.decoder_layer_sizes.clone(), cfg.other_activations, Activation::Identity);
        let encoder = FeedforwardNet::new(&enc_spec, rng)?;
        let decoder = FeedforwardNet::new(&dec_spec, rng)?;
        Ok(ObservationVae {
            enc_opt: OptimizerState::adam(cfg.learning_rate, encoder.num_params()),
            dec_opt: OptimizerState::adam(cfg.learning_rate, decoder.num_params()),
            encoder,
            decoder,
            latent_dim: cfg.latent_dim,
            batch_size: cfg.batch_size,
            updates: 0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn is_trained(&self) -> bool {
        self.updates > 0
    }

    /// `(means, log_variances)`, each `n x latent_dim`.
    pub fn encode(&self, obs: &[S], n: usize) -> Result<(Vec<S>, Vec<S>)> {
        let h = self.encoder.predict_batch(obs, n, Dropout::Off)?;
        Ok(split_latent(&h, self.latent_dim))
    }

    /// Decoded observations in `[0, 1]`, `n x obs_dim`.
    pub fn decode(&self, z: &[S], n: usize) -> Result<Vec<S>> {
        let mut x = self.decoder.predict_batch(z, n, Dropout::Off)?;
        x.iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(x)
    }

    /// Decodes `s` draws from the standard normal prior.
    pub fn sample<R: Rng>(&self, s: usize, rng: &mut R) -> Result<Vec<S>> {
        if s == 0 {
            return Ok(Vec::new());
        }
        let z: Vec<S> = (0..s * self.latent_dim).map(|_| S::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        self.decode(&z, s)
    }

    /// One shuffled pass of ELBO minimization over `obs`.
    pub fn train<R: Rng>(&mut self, obs: &[S], n: usize, rng: &mut R) -> Result<VaeLoss> {
        let dim = self.obs_dim();
        if n == 0 || obs.len() != n * dim {
            return reject("VAE training batch must be a non-empty set of full observations");
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let (mut rec, mut kl) = (0.0, 0.0);
        for mb in order.chunks(self.batch_size) {
            let x: Vec<S> = mb.iter().flat_map(|&i| obs[i * dim..(i + 1) * dim].iter().copied()).collect();
            let eps: Vec<S> = (0..mb.len() * self.latent_dim)
                .map(|_| S::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let l = self.step(&x, mb.len(), &eps)?;
            rec += l.reconstruction * mb.len() as f64;
            kl += l.kl * mb.len() as f64;
        }
        Ok(VaeLoss { reconstruction: rec / n as f64, kl: kl / n as f64 })
    }

    /// One gradient step with given reparameterization noise; returns the pre-step losses.
    pub fn step(&mut self, x: &[S], m: usize, eps: &[S]) -> Result<VaeLoss> {
        let l = self.latent_dim;
        let dim = self.obs_dim();
        let ms = S::from_usize_lossy(m);
        let half = S::lit(0.5);
        let enc = self.encoder.forward_trace(x, m, Dropout::Off)?;
        let (mu, logvar) = split_latent(enc.output(), l);
        let std: Vec<S> = logvar.iter().map(|&v| (half * v).exp()).collect();
        let z: Vec<S> = (0..m * l).map(|i| mu[i] + std[i] * eps[i]).collect();
        let dec = self.decoder.forward_trace(&z, m, Dropout::Off)?;

        let mut rec = 0.0;
        let mut d_logits = vec![S::zero(); m * dim];
        for ((g, &logit), &target) in d_logits.iter_mut().zip(dec.output()).zip(x) {
            let p = sigmoid(logit);
            rec += bce(p.as_f64(), target.as_f64());
            *g = (p - target) / ms;
        }
        let mut dec_grads = vec![S::zero(); self.decoder.num_params()];
        let dz = self.decoder.backward(&dec, &d_logits, &mut dec_grads, true).expect("input gradient");

        let mut kl = S::zero();
        let mut d_h = vec![S::zero(); m * 2 * l];
        for r in 0..m {
            for j in 0..l {
                let i = r * l + j;
                let var = std[i] * std[i];
                kl += half * (mu[i] * mu[i] + var - S::one() - logvar[i]);
                d_h[r * 2 * l + j] = dz[i] + mu[i] / ms;
                d_h[r * 2 * l + l + j] = dz[i] * eps[i] * half * std[i] + half * (var - S::one()) / ms;
            }
        }
        let mut enc_grads = vec![S::zero(); self.encoder.num_params()];
        self.encoder.backward(&enc, &d_h, &mut enc_grads, false);
        self.dec_opt.step(self.decoder.params_mut(), &dec_grads)?;
        self.enc_opt.step(self.encoder.params_mut(), &enc_grads)?;
        self.updates += 1;
        Ok(VaeLoss { reconstruction: rec / m as f64, kl: kl.as_f64() / m as f64 })
    }
}

fn split_latent<S: Scalar>(h: &[S], l: usize) -> (Vec<S>, Vec<S>) {
    let mut mu = Vec::with_capacity(h.len() / 2);
    let mut logvar = Vec::with_capacity(h.len() / 2);
    for row in h.chunks(2 * l) {
        mu.extend_from_slice(&row[..l]);
        logvar.extend_from_slice(&row[l..]);
    }
    (mu, logvar)
}

fn bce(p: f64, target: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// `0.5 * sum(mu^2 + exp(logvar) - 1 - logvar)`: KL of a diagonal Gaussian from the standard normal.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu.iter().zip(logvar).map(|(m, lv)| m * m + lv.exp() - 1.0 - lv).sum::<f64>()
}

/// The most recent `capacity` observations.
#[derive(Debug, Clone)]
pub struct ReplayWindow<S> {
    obs_dim: usize,
    capacity: usize,
    items: VecDeque<Vec<S>>,
}

impl<S: Scalar> ReplayWindow<S> {
    pub fn new(obs_dim: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayWindow { obs_dim, capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[S]) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(obs.to_vec());
    }

    pub fn extend(&mut self, obs: &[S]) {
        for o in obs.chunks(self.obs_dim) {
            self.push(o);
        }
    }

    /// `s` uniform draws with replacement.
    pub fn sample<R: Rng>(&self, s: usize, rng: &mut R) -> Result<Vec<S>> {
        if s == 0 {
            return Ok(Vec::new());
        }
        if self.items.is_empty() {
            return Err(Error::SamplerNotReady);
        }
        let mut out = Vec::with_capacity(s * self.obs_dim);
        for _ in 0..s {
            out.extend_from_slice(&self.items[rng.gen_range(0..self.items.len())]);
        }
        Ok(out)
    }
}

/// Anything that can produce observations without touching the environment.
pub trait ObservationSource<S: Scalar> {
    /// `s` row-major observations.
    fn sample_observations(&mut self, s: usize) -> Result<Vec<S>>;
}

/// Pairs a sampler with the random stream it draws from.
pub struct Seeded<'a, T, R> {
    pub sampler: &'a T,
    pub rng: &'a mut R,
}

impl<S: Scalar, R: Rng> ObservationSource<S> for Seeded<'_, ObservationSampler<S>, R> {
    fn sample_observations(&mut self, s: usize) -> Result<Vec<S>> {
        self.sampler.sample(s, self.rng)
    }
}

impl<S: Scalar, R: Rng> ObservationSource<S> for Seeded<'_, ReplayWindow<S>, R> {
    fn sample_observations(&mut self, s: usize) -> Result<Vec<S>> {
        self.sampler.sample(s, self.rng)
    }
}

impl<S: Scalar, R: Rng> ObservationSource<S> for Seeded<'_, ObservationVae<S>, R> {
    fn sample_observations(&mut self, s: usize) -> Result<Vec<S>> {
        self.sampler.sample(s, self.rng)
    }
}

/// Source of observations for interest queries, falling back to replay until the VAE has trained.
#[derive(Debug, Clone)]
pub struct ObservationSampler<S> {
    pub kind: SamplerKind,
    pub vae: Option<ObservationVae<S>>,
    pub replay: ReplayWindow<S>,
}

impl<S: Scalar> ObservationSampler<S> {
    pub fn new<R: Rng>(kind: SamplerKind, vae_cfg: &VaeConfig, replay_capacity: usize, rng: &mut R) -> Result<Self> {
        let obs_dim = vae_cfg.encoder_layer_sizes.first().copied().unwrap_or(0);
        let vae = match kind {
            SamplerKind::Vae => Some(ObservationVae::new(vae_cfg, rng)?),
            SamplerKind::Replay => None,
        };
        Ok(ObservationSampler { kind, vae, replay: ReplayWindow::new(obs_dim, replay_capacity)? })
    }

    /// Feeds one rollout's observations: replay always, VAE for one epoch when enabled.
    pub fn observe_rollout<R: Rng>(&mut self, obs: &[S], n: usize, rng: &mut R) -> Result<Option<VaeLoss>> {
        self.replay.extend(obs);
        match &mut self.vae {
            Some(v) if n > 0 => v.train(obs, n, rng).map(Some),
            _ => Ok(None),
        }
    }

    pub fn sample<R: Rng>(&self, s: usize, rng: &mut R) -> Result<Vec<S>> {
        match &self.vae {
            Some(v) if v.is_trained() => v.sample(s, rng),
            _ => self.replay.sample(s, rng),
        }
    }
}
