//! Online DIAYN: a skill discriminator `q(z|o)` and the diversity reward it induces.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{reject, Error, Result};
use crate::nn::{Activation, Dropout, FeedforwardNet, NetSpec, OptimizerState};
use crate::Scalar;

/// Posterior floor applied before taking logs.
pub const POSTERIOR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DiaynConfig {
    pub num_skills: usize,
    pub beta: f64,
    pub discriminator_layer_sizes: Vec<usize>,
    pub final_discriminator_activation: Activation,
    pub other_activations: Activation,
    pub discriminator_batch_size: usize,
    pub discriminator_learning_rate: f64,
}

impl Default for DiaynConfig {
    fn default() -> Self {
        DiaynConfig {
            num_skills: 5,
            beta: 5.0,
            discriminator_layer_sizes: vec![980, 200, 5],
            final_discriminator_activation: Activation::Softmax,
            other_activations: Activation::LeakyRelu,
            discriminator_batch_size: 128,
            discriminator_learning_rate: 0.001,
        }
    }
}

impl DiaynConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_skills < 2 {
            return Err(Error::Config("num_skills must be at least 2".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config("beta must be nonnegative".into()));
        }
        if self.discriminator_layer_sizes.last() != Some(&self.num_skills) {
            return Err(Error::Config(format!(
                "discriminator output {:?} must equal num_skills {}",
                self.discriminator_layer_sizes.last(),
                self.num_skills
            )));
        }
        if self.final_discriminator_activation != Activation::Softmax {
            return Err(Error::Config("discriminator must end in Softmax".into()));
        }
        if self.discriminator_batch_size == 0 {
            return Err(Error::Config("discriminator_batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that maps observations to a posterior over skills.
pub trait SkillPosterior<S: Scalar> {
    fn num_skills(&self) -> usize;

    /// Row-major `n x num_skills` posteriors.
    fn posterior_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>>;
}

/// Discriminator network `q(z|o)` with its optimizer.
#[derive(Debug, Clone)]
pub struct SkillClassifier<S> {
    pub net: FeedforwardNet<S>,
    opt: OptimizerState<S>,
    batch_size: usize,
}

impl<S: Scalar> SkillClassifier<S> {
    pub fn new<R: Rng>(cfg: &DiaynConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let spec = NetSpec::new(
            cfg.discriminator_layer_sizes.clone(),
            cfg.other_activations,
            cfg.final_discriminator_activation,
        );
        let net = FeedforwardNet::new(&spec, rng)?;
        let opt = OptimizerState::adam(cfg.discriminator_learning_rate, net.num_params());
        Ok(SkillClassifier { net, opt, batch_size: cfg.discriminator_batch_size })
    }

    pub fn posterior(&self, obs: &[S]) -> Result<Vec<S>> {
        self.net.forward(obs, None)
    }

    /// One pass over `(obs, skill)` pairs in shuffled minibatches; returns mean cross-entropy.
    pub fn train<R: Rng>(&mut self, obs: &[S], skills: &[usize], rng: &mut R) -> Result<f64> {
        let n = skills.len();
        if n == 0 {
            return reject("discriminator batch is empty");
        }
        let dim = self.net.input_dim();
        if obs.len() != n * dim {
            return reject("observation count does not match skill labels");
        }
        let w = self.net.output_dim();
        if let Some(&z) = skills.iter().find(|&&z| z >= w) {
            return reject(format!("skill {z} outside [0, {w})"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        let mut grads = vec![S::zero(); self.net.num_params()];
        for mb in order.chunks(self.batch_size) {
            let x: Vec<S> = mb.iter().flat_map(|&i| obs[i * dim..(i + 1) * dim].iter().copied()).collect();
            let labels: Vec<usize> = mb.iter().map(|&i| skills[i]).collect();
            total += self.step(&x, &labels, &mut grads)? * mb.len() as f64;
        }
        Ok(total / n as f64)
    }

    /// A single gradient step on one minibatch; returns its cross-entropy before the step.
    pub fn step(&mut self, x: &[S], labels: &[usize], grads: &mut Vec<S>) -> Result<f64> {
        let m = labels.len();
        let w = self.net.output_dim();
        let trace = self.net.forward_trace(x, m, Dropout::Off)?;
        let p = trace.output();
        let floor = S::lit(POSTERIOR_FLOOR);
        let ms = S::from_usize_lossy(m);
        let mut loss = S::zero();
        let mut upstream = vec![S::zero(); m * w];
        for (r, &z) in labels.iter().enumerate() {
            let pz = p[r * w + z].max(floor);
            loss -= pz.ln();
            upstream[r * w + z] = -S::one() / (pz * ms);
        }
        grads.iter_mut().for_each(|g| *g = S::zero());
        self.net.backward(&trace, &upstream, grads, false);
        self.opt.step(self.net.params_mut(), grads)?;
        Ok((loss / ms).as_f64())
    }
}

impl<S: Scalar> SkillPosterior<S> for SkillClassifier<S> {
    fn num_skills(&self) -> usize {
        self.net.output_dim()
    }

    fn posterior_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>> {
        self.net.predict_batch(obs, n, Dropout::Off)
    }
}

/// `beta * (log q(z|o) - log(1/w))` with `q` floored at [`POSTERIOR_FLOOR`].
pub fn diayn_reward<S: Scalar>(posterior_of_skill: S, num_skills: usize, beta: f64) -> S {
    let q = posterior_of_skill.max(S::lit(POSTERIOR_FLOOR));
    S::lit(beta) * (q.ln() + S::from_usize_lossy(num_skills).ln())
}

/// Mean cross-entropy of posteriors against labels.
pub fn cross_entropy<S: Scalar>(posteriors: &[S], labels: &[usize], w: usize) -> f64 {
    let floor = S::lit(POSTERIOR_FLOOR);
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &z)| -posteriors[r * w + z].max(floor).ln().as_f64())
        .sum();
    total / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded_rng;

    fn toy_cfg(w: usize, dim: usize) -> DiaynConfig {
        DiaynConfig {
            num_skills: w,
            discriminator_layer_sizes: vec![dim, 16, w],
            discriminator_batch_size: 32,
            ..DiaynConfig::default()
        }
    }

    #[test]
    fn reward_examples() {
        assert_eq!(diayn_reward(0.2f64, 5, 5.0), 5.0 * (0.2f64.ln() + 5f64.ln()));
        assert!(diayn_reward(0.2f64, 5, 5.0).abs() < 1e-12);
        assert!((diayn_reward(1.0f64, 5, 1.0) - 5f64.ln()).abs() < 1e-12);
        assert!((5f64.ln() - 1.609).abs() < 1e-3);
        let floor = diayn_reward(0.0f64, 5, 2.0);
        assert!(floor.is_finite());
        assert!((floor - 2.0 * (1e-8f64.ln() + 5f64.ln())).abs() < 1e-9);
        for w in 2..9 {
            assert!(diayn_reward(1.0 / w as f64, w, 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_predictor_loss_is_ln_w() {
        let p = vec![0.25f64; 12];
        assert!((cross_entropy(&p, &[0, 1, 3], 4) - 4f64.ln()).abs() < 1e-12);
    }

    fn clusters(n: usize, dim: usize, rng: &mut crate::nn::SeededRng) -> (Vec<f64>, Vec<usize>) {
        let mut obs = Vec::new();
        let mut skills = Vec::new();
        for i in 0..n {
            let z = i % 2;
            for d in 0..dim {
                let centre = if (d < dim / 2) == (z == 0) { 1.0 } else { 0.0 };
                obs.push(centre * rng.gen_range(0.7..1.0));
            }
            skills.push(z);
        }
        (obs, skills)
    }

    #[test]
    fn separable_clusters_are_learned() {
        let mut rng = seeded_rng(11);
        let mut q = SkillClassifier::<f64>::new(&toy_cfg(2, 8), &mut rng).unwrap();
        let (obs, skills) = clusters(256, 8, &mut rng);
        let first = q.train(&obs, &skills, &mut rng).unwrap();
        let mut last = first;
        for _ in 0..60 {
            last = q.train(&obs, &skills, &mut rng).unwrap();
        }
        assert!(last < 0.01 && last < first, "loss {first} -> {last}");
        let post = q.posterior_batch(&obs, 256).unwrap();
        for (r, &z) in skills.iter().enumerate() {
            let row = &post[r * 2..r * 2 + 2];
            assert_eq!(crate::ppo::argmax(row), z);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn single_class_loss_decreases_monotonically() {
        let mut rng = seeded_rng(12);
        let mut q = SkillClassifier::<f64>::new(&toy_cfg(3, 6), &mut rng).unwrap();
        let x: Vec<f64> = (0..32 * 6).map(|i| ((i * 7) % 5) as f64 / 5.0).collect();
        let labels = vec![2usize; 32];
        let mut grads = vec![0.0; q.net.num_params()];
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let loss = q.step(&x, &labels, &mut grads).unwrap();
            assert!(loss < prev, "{loss} !< {prev}");
            prev = loss;
            let post = q.posterior_batch(&x, 32).unwrap();
            for row in post.chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn untrained_posterior_is_near_uniform() {
        let mut rng = seeded_rng(13);
        let cfg = DiaynConfig::default();
        let q = SkillClassifier::<f64>::new(&cfg, &mut rng).unwrap();
        let mut env = crate::env::DoorKeyChange::new(crate::env::EnvConfig::default()).unwrap();
        env.reset(3);
        let p = q.posterior(&env.observe::<f64>()).unwrap();
        assert_eq!(p.len(), 5);
        for v in p {
            assert!((v - 0.2).abs() < 0.15, "{v}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(DiaynConfig { num_skills: 1, discriminator_layer_sizes: vec![980, 200, 1], ..Default::default() }
            .validate()
            .is_err());
        assert!(DiaynConfig { num_skills: 4, ..Default::default() }.validate().is_err());
        assert!(DiaynConfig::default().validate().is_ok());
    }
}
