use crate::error::{Error, Result};

/// PPO hyperparameters; defaults are the full-scale values.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub policy_layers_sizes: Vec<usize>,
    pub value_layers_sizes: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 0.00075,
            n_steps: 2048,
            batch_size: 256,
            n_epochs: 4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            ent_coef: 0.05,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            policy_layers_sizes: vec![980, 256, 64, 7],
            value_layers_sizes: vec![980, 256, 64, 1],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("n_steps", self.n_steps as f64),
            ("batch_size", self.batch_size as f64),
            ("n_epochs", self.n_epochs as f64),
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_range", self.clip_range),
            ("ent_coef", self.ent_coef),
            ("vf_coef", self.vf_coef),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.clip_range >= 1.0 {
            return Err(Error::Config("clip_range must lie in (0, 1)".into()));
        }
        if self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return Err(Error::Config("gamma and gae_lambda must lie in (0, 1]".into()));
        }
        for sizes in [&self.policy_layers_sizes, &self.value_layers_sizes] {
            if sizes.len() < 2 {
                return Err(Error::Config(format!("layer sizes {sizes:?} need at least two entries")));
            }
        }
        if *self.value_layers_sizes.last().unwrap() != 1 {
            return Err(Error::Config("value network must have a single output".into()));
        }
        Ok(())
    }
}
