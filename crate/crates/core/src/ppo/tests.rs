use super::*;
use crate::nn::seeded_rng;

fn small_cfg() -> PpoConfig {
    PpoConfig {
        policy_layers_sizes: vec![6, 16, 8, 7],
        value_layers_sizes: vec![6, 16, 8, 1],
        ..PpoConfig::default()
    }
}

#[test]
fn uniform_logits_give_uniform_policy() {
    let mut rng = seeded_rng(0);
    let mut ac = ActorCritic::<f64>::new(&small_cfg(), 0, 0, &mut rng).unwrap();
    let last = ac.policy.num_layers() - 1;
    let (w, b) = (ac.policy.weight_range(last), ac.policy.bias_range(last));
    ac.policy.params_mut()[w].iter_mut().for_each(|v| *v = 0.0);
    ac.policy.params_mut()[b].iter_mut().for_each(|v| *v = 0.0);
    let p = ac.action_probs(&[0.3; 6], &[None], &[]).unwrap();
    for v in p {
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
    }
    let out = ac.act(&[0.3; 6], None, &[], false, &mut rng).unwrap();
    assert!((out.log_prob - (1.0f64 / 7.0).ln()).abs() < 1e-12);
}

#[test]
fn deterministic_takes_dominant_action() {
    let mut rng = seeded_rng(1);
    let mut ac = ActorCritic::<f64>::new(&small_cfg(), 0, 0, &mut rng).unwrap();
    let last = ac.policy.num_layers() - 1;
    let b = ac.policy.bias_range(last);
    ac.policy.params_mut()[b.start + 4] = 50.0;
    for _ in 0..20 {
        let obs: Vec<f64> = (0..6).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        assert_eq!(ac.act(&obs, None, &[], true, &mut rng).unwrap().action, 4);
    }
}

#[test]
fn sampled_frequencies_match_probabilities() {
    let mut rng = seeded_rng(2);
    let mut ac = ActorCritic::<f64>::new(&small_cfg(), 0, 0, &mut rng).unwrap();
    let last = ac.policy.num_layers() - 1;
    let b = ac.policy.bias_range(last);
    for (j, v) in ac.policy.params_mut()[b].iter_mut().enumerate() {
        *v = j as f64 * 0.3;
    }
    let obs = [0.2, 0.4, 0.0, 1.0, 0.5, 0.1];
    let probs = ac.action_probs(&obs, &[None], &[]).unwrap();
    let mut counts = [0usize; 7];
    let n = 10_000;
    for _ in 0..n {
        let out = ac.act(&obs, None, &[], false, &mut rng).unwrap();
        assert!((out.log_prob - probs[out.action].ln()).abs() < 1e-12);
        counts[out.action] += 1;
    }
    for j in 0..7 {
        assert!((counts[j] as f64 / n as f64 - probs[j]).abs() < 0.02, "action {j}");
    }
}

#[test]
fn surrogate_clip_semantics() {
    // ratio 1: loss term is -A
    let adv = [0.5f64, -1.0, 2.0, 0.0];
    let mean_loss: f64 = adv.iter().map(|&a| -clipped_surrogate(1.0, a, 0.2).0).sum::<f64>() / 4.0;
    assert!((mean_loss + adv.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    // positive advantage with ratio 1.5 uses the clipped ratio 1.2
    let (v, d) = clipped_surrogate(1.5f64, 2.0, 0.2);
    assert!((v - 2.4).abs() < 1e-12);
    assert_eq!(d, 0.0);
    // negative advantage with ratio 1.5 keeps the unclipped (pessimistic) term
    let (v, d) = clipped_surrogate(1.5f64, -2.0, 0.2);
    assert!((v + 3.0).abs() < 1e-12);
    assert_eq!(d, -2.0);
}

#[test]
fn uniform_entropy_is_ln7() {
    let row = policy_row(&[0.0f64; 7], 3, (1.0f64 / 7.0).ln(), 1.0, 0.2);
    assert!((row.entropy - 7f64.ln()).abs() < 1e-12);
    assert!((7f64.ln() - 1.9459).abs() < 1e-4);
    assert!((row.ratio - 1.0).abs() < 1e-12);
    // ent_coef scales the entropy bonus into the loss
    let ent_coef = 0.05;
    assert!((ent_coef * row.entropy - 0.05 * 1.945910149).abs() < 1e-9);
}

#[test]
fn policy_row_gradients_match_finite_differences() {
    let logits = [0.3f64, -0.2, 1.1, 0.0, -0.7, 0.4, 0.2];
    let h = 1e-6;
    for &(old, adv) in &[(-1.9f64, 0.8f64), (-2.5, -1.3), (-0.8, 1.5)] {
        let row = policy_row(&logits, 2, old, adv, 0.2);
        for j in 0..7 {
            let mut up = logits;
            let mut down = logits;
            up[j] += h;
            down[j] -= h;
            let (ru, rd) = (policy_row(&up, 2, old, adv, 0.2), policy_row(&down, 2, old, adv, 0.2));
            let fd_s = (ru.surrogate_loss - rd.surrogate_loss) / (2.0 * h);
            let fd_e = (ru.entropy - rd.entropy) / (2.0 * h);
            assert!((fd_s - row.d_surrogate[j]).abs() < 1e-6, "surrogate {j}");
            assert!((fd_e - row.d_entropy[j]).abs() < 1e-6, "entropy {j}");
        }
    }
}

#[test]
fn skill_inputs_are_one_hot_and_checked() {
    let mut rng = seeded_rng(3);
    let ac = ActorCritic::<f64>::new(&small_cfg(), 3, 2, &mut rng).unwrap();
    assert_eq!(ac.policy.input_dim(), 6 + 3 + 2);
    let x = ac.build_input(&[1.0; 6], &[Some(1)], &[0.5, -0.5]).unwrap();
    assert_eq!(&x[6..], &[0.0, 1.0, 0.0, 0.5, -0.5]);
    assert!(ac.build_input(&[1.0; 6], &[Some(3)], &[0.5, -0.5]).is_err());
    assert!(ac.build_input(&[1.0; 6], &[Some(0)], &[0.5]).is_err());
}

/// One-state contextual bandit: the rewarded action depends on the observation.
#[test]
fn update_learns_contextual_bandit() {
    let mut rng = seeded_rng(4);
    let cfg = PpoConfig { n_steps: 256, batch_size: 64, ..small_cfg() };
    let mut ac = ActorCritic::<f64>::new(&cfg, 0, 0, &mut rng).unwrap();
    let contexts = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]];
    let target = [2usize, 5];
    for _ in 0..40 {
        let mut batch = RolloutBatch::new(cfg.n_steps, 1, 6, vec![]);
        for t in 0..cfg.n_steps {
            let c = t % 2;
            let out = ac.act(&contexts[c], None, &[], false, &mut rng).unwrap();
            let r = if out.action == target[c] { 1.0 } else { 0.0 };
            batch.push(StepRecord {
                obs: &contexts[c],
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
        let stats = ac.update(&batch, &cfg, &mut rng).unwrap();
        assert!(stats.entropy.is_finite() && stats.value_loss.is_finite());
    }
    for c in 0..2 {
        let p = ac.action_probs(&contexts[c], &[None], &[]).unwrap();
        assert!(p[target[c]] > 0.9, "context {c}: {:?}", p);
    }
}
