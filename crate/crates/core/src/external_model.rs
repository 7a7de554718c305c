//! The correct-key-distance predictor trained from self-labelled rollout data.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{reject, Error, Result};
use crate::nn::{Activation, Dropout, DropoutMask, FeedforwardNet, MaskBatch, NetSpec, OptimizerState};
use crate::ppo::RolloutBatch;
use crate::Scalar;

/// Rows evaluated per forward pass when scoring large sets.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalModelConfig {
    pub layer_sizes: Vec<usize>,
    pub layer_activations: Activation,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_per_rollout: usize,
}

impl Default for ExternalModelConfig {
    fn default() -> Self {
        ExternalModelConfig {
            layer_sizes: vec![980, 100, 10, 1],
            layer_activations: Activation::Relu,
            dropout_p: 0.5,
            batch_size: 256,
            learning_rate: 0.001,
            epochs_per_rollout: 8,
        }
    }
}

impl ExternalModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("external model needs at least two layer sizes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0,1)", self.dropout_p)));
        }
        if self.batch_size == 0 || self.epochs_per_rollout == 0 {
            return Err(Error::Config("batch_size and epochs_per_rollout must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Observations paired with regression targets, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<S> {
    pub obs_dim: usize,
    pub obs: Vec<S>,
    pub labels: Vec<S>,
}

impl<S: Scalar> LabeledSet<S> {
    pub fn new(obs_dim: usize) -> Self {
        LabeledSet { obs_dim, obs: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, obs: &[S], label: S) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        self.obs.extend_from_slice(obs);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[S] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }
}

/// One labelled sample per rollout step, using the ground truth recorded at collection time.
pub fn label_rollout<S: Scalar>(batch: &RolloutBatch<S>) -> Result<LabeledSet<S>> {
    let mut set = LabeledSet::new(batch.obs_dim);
    set.obs = batch.obs.clone();
    set.labels.reserve(batch.len());
    for (i, gt) in batch.ground_truth.iter().enumerate() {
        let gt = gt.ok_or(Error::MissingGroundTruth(i))?;
        set.labels.push(S::lit(gt.label()));
    }
    Ok(set)
}

#[derive(Debug, Clone)]
pub struct ExternalModel<S> {
    pub net: FeedforwardNet<S>,
    opt: OptimizerState<S>,
    batch_size: usize,
}

impl<S: Scalar> ExternalModel<S> {
    pub fn new<R: Rng>(cfg: &ExternalModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let spec = NetSpec::new(cfg.layer_sizes.clone(), cfg.layer_activations, Activation::Identity)
            .with_dropout(cfg.dropout_p);
        let net = FeedforwardNet::new(&spec, rng)?;
        Ok(Self::from_net(net, cfg.learning_rate, cfg.batch_size))
    }

    pub fn from_net(net: FeedforwardNet<S>, learning_rate: f64, batch_size: usize) -> Self {
        let opt = OptimizerState::adam(learning_rate, net.num_params());
        ExternalModel { net, opt, batch_size }
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// First output for one observation; deterministic without a mask.
    pub fn predict(&self, obs: &[S], mask: Option<&DropoutMask<S>>) -> Result<S> {
        Ok(self.net.forward(obs, mask)?[0])
    }

    /// `n x output_dim` predictions without dropout.
    pub fn predict_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>> {
        let dim = self.net.input_dim();
        let mut out = Vec::with_capacity(n * self.output_dim());
        for (c, chunk) in obs.chunks(EVAL_CHUNK * dim).enumerate() {
            let rows = (n - c * EVAL_CHUNK).min(EVAL_CHUNK);
            out.extend(self.net.predict_batch(chunk, rows, Dropout::Off)?);
        }
        if out.len() != n * self.output_dim() {
            return reject("observation buffer does not match sample count");
        }
        Ok(out)
    }

    /// `epochs` shuffled passes with training-time dropout; returns the mean loss of each epoch.
    pub fn train_epochs<R: Rng>(&mut self, set: &LabeledSet<S>, epochs: usize, rng: &mut R) -> Result<Vec<f64>> {
        if set.is_empty() {
            return reject("external model training set is empty");
        }
        if set.obs_dim != self.net.input_dim() || self.output_dim() != 1 {
            return reject("training set does not match the model's input or output size");
        }
        let n = set.len();
        let p = self.net.dropout_p();
        let mut order: Vec<usize> = (0..n).collect();
        let mut grads = vec![S::zero(); self.net.num_params()];
        let mut trace = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for mb in order.chunks(self.batch_size) {
                let m = mb.len();
                let x: Vec<S> = mb.iter().flat_map(|&i| set.observation(i).iter().copied()).collect();
                let masks = (p > 0.0).then(|| MaskBatch::sample(self.net.hidden_sizes(), m, p, rng));
                let dropout = masks.as_ref().map_or(Dropout::Off, Dropout::PerSample);
                let tr = self.net.forward_trace(&x, m, dropout)?;
                let ms = S::from_usize_lossy(m);
                let mut loss = S::zero();
                let upstream: Vec<S> = tr
                    .output()
                    .iter()
                    .zip(mb)
                    .map(|(&y, &i)| {
                        let r = y - set.labels[i];
                        loss += r * r;
                        S::lit(2.0) * r / ms
                    })
                    .collect();
                grads.iter_mut().for_each(|g| *g = S::zero());
                self.net.backward(&tr, &upstream, &mut grads, false);
                self.opt.step(self.net.params_mut(), &grads)?;
                total += loss.as_f64();
            }
            trace.push(total / n as f64);
        }
        Ok(trace)
    }

    /// Mean squared error over the set, without dropout.
    pub fn evaluate(&self, set: &LabeledSet<S>) -> Result<f64> {
        if set.is_empty() {
            return reject("cannot evaluate on an empty set");
        }
        let pred = self.predict_batch(&set.obs, set.len())?;
        Ok(mse(&pred, &set.labels))
    }
}

pub fn mse<S: Scalar>(pred: &[S], target: &[S]) -> f64 {
    let sum: f64 = pred.iter().zip(target).map(|(&p, &t)| (p - t).as_f64().powi(2)).sum();
    sum / target.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Color, DoorKeyChange, EnvConfig, GroundTruth, OBS_DIM, OUT_OF_VIEW_DISTANCE};
    use crate::nn::seeded_rng;
    use crate::ppo::StepRecord;

    fn small_cfg() -> ExternalModelConfig {
        ExternalModelConfig { layer_sizes: vec![6, 24, 12, 1], batch_size: 16, ..Default::default() }
    }

    fn random_set(n: usize, seed: u64) -> LabeledSet<f64> {
        let mut rng = seeded_rng(seed);
        let mut set = LabeledSet::new(6);
        for _ in 0..n {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y = 3.0 * x[0] - 2.0 * x[1] + x[2] * x[3] + 1.0;
            set.push(&x, y);
        }
        set
    }

    fn gt(red: f64, blue: f64, color: Color) -> GroundTruth {
        GroundTruth { red_key_distance: red, blue_key_distance: blue, correct_key_color: color }
    }

    fn rollout_with(truths: Vec<Option<GroundTruth>>) -> RolloutBatch<f64> {
        let mut b = RolloutBatch::new(truths.len(), 1, OBS_DIM, vec![]);
        let obs = vec![0.0; OBS_DIM];
        for g in truths {
            b.push(StepRecord {
                obs: &obs,
                skill: None,
                action: 0,
                log_prob: 0.0,
                value: 0.0,
                extrinsic_reward: 0.0,
                intrinsic_reward: 0.0,
                bootstrap_reward: 0.0,
                done: false,
                ground_truth: g,
            });
        }
        b
    }

    #[test]
    fn labels_follow_ground_truth() {
        let far = gt(OUT_OF_VIEW_DISTANCE, OUT_OF_VIEW_DISTANCE, Color::Red);
        let set = label_rollout(&rollout_with(vec![Some(far); 4])).unwrap();
        assert!(set.labels.iter().all(|&l| l == 14.0));
        let mixed = vec![Some(gt(2.0, 5.0, Color::Red)), Some(gt(2.0, 5.0, Color::Blue)), Some(far)];
        let set = label_rollout(&rollout_with(mixed)).unwrap();
        assert_eq!(set.labels, vec![2.0, 5.0, 14.0]);
    }

    #[test]
    fn relabelled_trajectory_differs_where_keys_visible() {
        let mut env = DoorKeyChange::new(EnvConfig::default()).unwrap();
        env.reset(4);
        let mut rng = seeded_rng(4);
        let mut differs = false;
        for _ in 0..300 {
            let truth = env.state().ground_truth();
            let flipped = truth.label_for(Color::Blue);
            if truth.red_key_distance != truth.blue_key_distance {
                differs |= truth.label() != flipped;
            } else {
                assert_eq!(truth.label(), flipped);
            }
            if env.step(rng.gen_range(0..3)).unwrap().done() {
                env.reset(rng.gen());
            }
        }
        assert!(differs);
    }

    #[test]
    fn missing_ground_truth_is_an_error() {
        let b = rollout_with(vec![Some(gt(1.0, 2.0, Color::Red)), None]);
        assert!(matches!(label_rollout(&b), Err(Error::MissingGroundTruth(1))));
    }

    #[test]
    fn constant_labels_are_fit() {
        let mut rng = seeded_rng(1);
        let mut m = ExternalModel::<f64>::new(&ExternalModelConfig { dropout_p: 0.0, learning_rate: 0.01, ..small_cfg() }, &mut rng).unwrap();
        let mut set = random_set(64, 2);
        set.labels.iter_mut().for_each(|l| *l = 7.0);
        let losses = m.train_epochs(&set, 300, &mut rng).unwrap();
        assert!(*losses.last().unwrap() < 1e-3, "{:?}", losses.last());
        assert!((m.predict(set.observation(0), None).unwrap() - 7.0).abs() < 0.05);
    }

    #[test]
    fn more_epochs_fit_at_least_as_well() {
        let set = random_set(200, 3);
        let run = |epochs| {
            let mut rng = seeded_rng(5);
            let mut m = ExternalModel::<f64>::new(&small_cfg(), &mut rng).unwrap();
            m.train_epochs(&set, epochs, &mut rng).unwrap();
            m.evaluate(&set).unwrap()
        };
        let (one, eight) = (run(1), run(8));
        assert!(eight <= one * 1.05, "8 epochs {eight} vs 1 epoch {one}");
    }

    #[test]
    fn loss_trends_down() {
        let set = random_set(1000, 6);
        let mut rng = seeded_rng(7);
        let mut m = ExternalModel::<f64>::new(&small_cfg(), &mut rng).unwrap();
        let losses = m.train_epochs(&set, 20, &mut rng).unwrap();
        let smooth = crate::metrics::ewma_smooth(&losses, 5).unwrap();
        assert!(smooth.last().unwrap() < &smooth[0]);
        assert!(smooth.windows(2).filter(|w| w[1] > w[0]).count() <= 2);
    }

    #[test]
    fn prediction_determinism_and_masks() {
        let set = random_set(300, 8);
        let mut rng = seeded_rng(9);
        let mut m = ExternalModel::<f64>::new(&small_cfg(), &mut rng).unwrap();
        m.train_epochs(&set, 5, &mut rng).unwrap();
        let x = set.observation(0);
        assert_eq!(m.predict(x, None).unwrap(), m.predict(x, None).unwrap());
        let mut outs: Vec<f64> = (0..6).map(|s| m.predict(x, Some(&m.net.sample_mask(s))).unwrap()).collect();
        outs.sort_by(f64::total_cmp);
        outs.dedup();
        assert!(outs.len() >= 4, "{outs:?}");

        let mut zero_p = m.clone();
        zero_p.net.set_dropout_p(0.0);
        let mask = zero_p.net.sample_mask(3);
        assert_eq!(zero_p.predict(x, Some(&mask)).unwrap(), zero_p.predict(x, None).unwrap());
    }

    #[test]
    fn evaluation_examples() {
        let mut set = LabeledSet::new(2);
        for i in 0..5 {
            set.push(&[i as f64, 1.0], 14.0);
        }
        let constant = |c: f64| {
            let mut net = FeedforwardNet::<f64>::zeros(vec![2, 1], vec![Activation::Identity], 0.0).unwrap();
            let b = net.bias_range(0);
            net.params_mut()[b][0] = c;
            ExternalModel::from_net(net, 0.001, 8)
        };
        assert_eq!(constant(14.0).evaluate(&set).unwrap(), 0.0);
        assert_eq!(constant(0.0).evaluate(&set).unwrap(), 196.0);

        let mut reversed = set.clone();
        reversed.labels = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let forward = constant(2.0).evaluate(&reversed).unwrap();
        reversed.labels.reverse();
        reversed.obs.chunks_mut(2).for_each(|c| c.reverse());
        assert_eq!(forward, constant(2.0).evaluate(&reversed).unwrap());
    }
}
