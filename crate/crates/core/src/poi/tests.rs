use super::*;
use crate::diayn::SkillPosterior;
use crate::error::{Error, Result};
use crate::external_model::{ExternalModel, ExternalModelConfig};
use crate::interest::{ConstantField, FieldKind, InterestField, McDropoutField};
use crate::nn::seeded_rng;
use crate::ppo::{ActorCritic, PpoConfig, RolloutBatch, StepRecord};
use crate::sampler::{ObservationSource, ReplayWindow, Seeded};
use rand::Rng;

/// Two-dimensional observations `[skill_hint, interest]`.
struct Halves {
    interest: [f64; 2],
}

impl ObservationSource<f64> for Halves {
    fn sample_observations(&mut self, s: usize) -> Result<Vec<f64>> {
        Ok((0..s).flat_map(|i| if i % 2 == 0 { [0.0, self.interest[0]] } else { [1.0, self.interest[1]] }).collect())
    }
}

/// Reads interest from the second coordinate.
struct SecondCoordinate;

impl InterestField<f64> for SecondCoordinate {
    fn kind(&self) -> FieldKind {
        FieldKind::McDropout
    }

    fn interest_batch(&self, obs: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(obs.chunks(obs.len() / n.max(1)).map(|r| r[1]).collect())
    }
}

/// Assigns skill `round(x[0])` with probability one.
struct Hard(usize);

impl SkillPosterior<f64> for Hard {
    fn num_skills(&self) -> usize {
        self.0
    }

    fn posterior_batch(&self, obs: &[f64], n: usize) -> Result<Vec<f64>> {
        let d = obs.len() / n;
        Ok(obs
            .chunks(d)
            .flat_map(|r| (0..self.0).map(move |z| if z == r[0].round() as usize { 1.0 } else { 0.0 }))
            .collect())
    }
}

fn frequencies(prior_eta: f64, interest: [f64; 2], draws: usize) -> [f64; 2] {
    let mut rng = seeded_rng(17);
    let mut counts = [0usize; 2];
    for _ in 0..draws {
        let (z, _) = biased_skill_sample(&SecondCoordinate, &mut Halves { interest }, &Hard(2), prior_eta, 10, &mut rng)
            .unwrap();
        counts[z] += 1;
    }
    counts.map(|c| c as f64 / draws as f64)
}

#[test]
fn hard_classifier_oracle() {
    let f = frequencies(0.0, [0.0, 2f64.ln()], 30_000);
    assert!((f[0] - 1.0 / 3.0).abs() < 0.01 && (f[1] - 2.0 / 3.0).abs() < 0.01, "{f:?}");
    let u = frequencies(1.0, [0.0, 2f64.ln()], 30_000);
    assert!((u[0] - 0.5).abs() < 0.01, "{u:?}");
}

#[test]
fn prior_shapes() {
    let p = SkillPrior::from_averages(&[0.0, 5.0, -2.0], 1.0).unwrap();
    assert!(p.probs().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    let c = SkillPrior::from_averages(&[0.7; 4], 0.3).unwrap();
    assert!(c.probs().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    let m = SkillPrior::from_averages(&[0.0, 2f64.ln()], 0.0).unwrap();
    assert!((m.probs()[1] - 2.0 / 3.0).abs() < 1e-12);
    assert!(SkillPrior::from_averages(&[0.0], 1.5).is_err());
}

#[test]
fn degenerate_skill_gets_minimum_average() {
    let interest = [1.0, 3.0, 5.0];
    let posts = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let a = skill_interest_averages(&interest, &posts, 3).unwrap();
    assert_eq!(a, vec![1.0, 4.0, 1.0]);
    let none = skill_interest_averages(&[1.0f64], &[0.0, 0.0], 2).unwrap();
    assert_eq!(none, vec![0.0, 0.0]);
}

#[test]
fn soft_posteriors_weight_interest() {
    let a = skill_interest_averages(&[2.0, 4.0], &[0.75, 0.25, 0.25, 0.75], 2).unwrap();
    assert!((a[0] - 2.5).abs() < 1e-12 && (a[1] - 3.5).abs() < 1e-12);
}

#[test]
fn intrinsic_reward_examples() {
    assert_eq!(interest_intrinsic_reward(&ConstantField(0.0), &[1.0, 2.0], 1.0).unwrap(), 0.0);
    let cfg = ExternalModelConfig { layer_sizes: vec![4, 8, 1], dropout_p: 0.0, ..Default::default() };
    let m = ExternalModel::<f64>::new(&cfg, &mut seeded_rng(1)).unwrap();
    let f = McDropoutField::new(&m, 30, 2).unwrap();
    let mut rng = seeded_rng(3);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
        assert_eq!(interest_intrinsic_reward(&f, &x, 1.0).unwrap(), 0.0);
    }
    assert_eq!(interest_intrinsic_reward(&ConstantField(0.5), &[0.0], 3.0).unwrap(), 1.5);
}

fn embedding_models(obs_dim: usize, q: usize, seed: u64) -> PoiEmbedding<f64> {
    let cfg = EmbeddingConfig { embedding_dim: q, hidden: 16, set_features: 8, ..Default::default() };
    PoiEmbedding::new(obs_dim, &cfg, &mut seeded_rng(seed)).unwrap()
}

fn replay(obs_dim: usize, n: usize, seed: u64) -> ReplayWindow<f64> {
    let mut rng = seeded_rng(seed);
    let mut w = ReplayWindow::new(obs_dim, n).unwrap();
    for _ in 0..n {
        let x: Vec<f64> = (0..obs_dim).map(|_| rng.gen()).collect();
        w.push(&x);
    }
    w
}

#[test]
fn constant_field_is_fit() {
    let mut m = embedding_models(5, 4, 1);
    let window = replay(5, 64, 2);
    let mut rng = seeded_rng(3);
    let e = m.initial_embedding();
    let mut last = f64::INFINITY;
    for _ in 0..2000 {
        let mut src = Seeded { sampler: &window, rng: &mut rng };
        last = train_embedding_models(&mut m, &e, &mut src, &ConstantField(2.0), 32, 8).unwrap();
        assert!(last >= 0.0);
    }
    assert!(last < 1e-3, "{last}");
    let e2 = m.apply(&window.sample(32, &mut rng).unwrap(), &[2.0; 32], &e).unwrap();
    let p = m.predict(&window.sample(4, &mut rng).unwrap(), 4, &e2).unwrap();
    assert!(p.iter().all(|v| (v - 2.0).abs() < 0.05), "{p:?}");
}

#[test]
fn eval_term_is_additive() {
    let m = embedding_models(3, 2, 4);
    let mut rng = seeded_rng(5);
    let x: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
    let poi: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
    let xe: Vec<f64> = (0..9).map(|_| rng.gen()).collect();
    let pe = vec![0.3, 0.9, 0.1];
    let e = m.initial_embedding();
    let with = m.clone().train_step(&x, &poi, &xe, &pe, &e).unwrap();
    let without = m.clone().train_step(&x, &poi, &[], &[], &e).unwrap();
    let (fit, eval) = m.loss(&x, &poi, &xe, &pe, &e).unwrap();
    assert!((without - fit).abs() < 1e-12);
    assert!((with - without - eval).abs() < 1e-12);
}

#[test]
fn embedding_gradients_match_finite_differences() {
    let m = embedding_models(3, 2, 6);
    let mut rng = seeded_rng(7);
    let x: Vec<f64> = (0..12).map(|_| rng.gen()).collect();
    let poi = vec![0.5, 1.5, -0.5, 0.2];
    let xe: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
    let pe = vec![1.0, 0.0];
    let e = vec![0.3, 0.6];
    let total = |m: &PoiEmbedding<f64>| {
        let (a, b) = m.loss(&x, &poi, &xe, &pe, &e).unwrap();
        a + b
    };
    let mut sgd = m.clone();
    for (o, n) in sgd.opts.iter_mut().zip([m.phi.num_params(), m.rho.num_params(), m.predictor.num_params()]) {
        *o = crate::nn::OptimizerState::new(crate::nn::OptimizerKind::Sgd, 1.0, n);
    }
    let mut stepped = sgd.clone();
    stepped.train_step(&x, &poi, &xe, &pe, &e).unwrap();
    let h = 1e-6;
    for which in 0..3 {
        let params = |m: &PoiEmbedding<f64>| -> Vec<f64> {
            [&m.phi, &m.rho, &m.predictor][which].params().to_vec()
        };
        let n = params(&m).len();
        for i in [0, n / 3, n - 1] {
            let analytic = params(&sgd)[i] - params(&stepped)[i];
            let bump = |d: f64| {
                let mut c = m.clone();
                [&mut c.phi, &mut c.rho, &mut c.predictor][which].params_mut()[i] += d;
                total(&c)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            assert!((analytic - fd).abs() <= 1e-5 * fd.abs().max(1e-4), "net {which} param {i}: {analytic} vs {fd}");
        }
    }
}

struct KeepEmbedding(usize);

impl EmbeddingUpdate<f64> for KeepEmbedding {
    fn embedding_dim(&self) -> usize {
        self.0
    }

    fn apply(&self, _x: &[f64], _poi: &[f64], e: &[f64]) -> Result<Vec<f64>> {
        Ok(e.to_vec())
    }
}

#[test]
fn update_embedding_examples() {
    let window = replay(5, 20, 8);
    let mut rng = seeded_rng(9);
    let e = vec![0.1, 0.2, 0.3];
    let mut src = Seeded { sampler: &window, rng: &mut rng };
    assert_eq!(update_embedding(&KeepEmbedding(3), &e, &mut src, &ConstantField(1.0), 10, 4).unwrap(), e);

    let m = embedding_models(5, 3, 10);
    let run = || {
        let mut rng = seeded_rng(11);
        let mut src = Seeded { sampler: &window, rng: &mut rng };
        update_embedding(&m, &e, &mut src, &ConstantField(1.0), 10, 4).unwrap()
    };
    let a = run();
    assert_eq!(a.len(), 3);
    assert_eq!(a, run());
    let mut src = Seeded { sampler: &window, rng: &mut rng };
    assert!(matches!(update_embedding(&m, &e, &mut src, &ConstantField(1.0), 10, 0), Err(Error::Config(_))));
}

fn small_ppo() -> PpoConfig {
    PpoConfig {
        policy_layers_sizes: vec![4, 16, 8, 7],
        value_layers_sizes: vec![4, 16, 8, 1],
        n_steps: 128,
        batch_size: 64,
        ..PpoConfig::default()
    }
}

#[test]
fn policy_conditioning() {
    let mut rng = seeded_rng(12);
    let cfg = small_ppo();
    let mut ac = ActorCritic::<f64>::new(&cfg, 0, 2, &mut rng).unwrap();
    let obs = [1.0, 0.0, 0.5, 0.0];
    let zero = condition_policy_on_embedding(&ac, &obs, &[0.0, 0.0]).unwrap();
    assert!((zero.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let padded = &ac.policy;
    let x: Vec<f64> = obs.iter().copied().chain([0.0, 0.0]).collect();
    let logits = padded.forward(&x, None).unwrap();
    let direct = crate::nn::softmax(&logits).unwrap();
    assert_eq!(zero, direct);
    assert!(matches!(condition_policy_on_embedding(&ac, &obs, &[0.0]), Err(Error::Config(_))));

    // Rewarded action depends only on the embedding.
    let embeddings = [[1.0, 0.0], [0.0, 1.0]];
    let target = [1usize, 4];
    for round in 0..60 {
        let c = round % 2;
        let mut batch = RolloutBatch::new(cfg.n_steps, 1, 4, embeddings[c].to_vec());
        for _ in 0..cfg.n_steps {
            let out = ac.act(&obs, None, &embeddings[c], false, &mut rng).unwrap();
            let r = if out.action == target[c] { 1.0 } else { 0.0 };
            batch.push(StepRecord {
                obs: &obs,
                skill: None,
                action: out.action,
                log_prob: out.log_prob,
                value: out.value,
                extrinsic_reward: r,
                intrinsic_reward: 0.0,
                bootstrap_reward: 0.0,
                done: true,
                ground_truth: None,
            });
        }
        batch.last_values = vec![0.0];
        ac.update(&batch, &cfg, &mut rng).unwrap();
    }
    let p0 = condition_policy_on_embedding(&ac, &obs, &embeddings[0]).unwrap();
    let p1 = condition_policy_on_embedding(&ac, &obs, &embeddings[1]).unwrap();
    assert!(p0[target[0]] > 0.5 && p1[target[1]] > 0.5, "{p0:?} {p1:?}");
    assert_ne!(p0, p1);
}
