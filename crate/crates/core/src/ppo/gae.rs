use crate::Scalar;

/// Generalized advantage estimation over one environment's trajectory segment.
///
/// `dones[t]` marks that the episode ended after step `t`; `bootstrap_value` is the
/// value of the state following the last step. Returns `(advantages, returns)`.
pub fn compute_gae<S: Scalar>(
    rewards: &[S],
    values: &[S],
    dones: &[bool],
    bootstrap_value: S,
    gamma: S,
    lambda: S,
) -> (Vec<S>, Vec<S>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "gae inputs must have equal lengths");
    let mut adv = vec![S::zero(); n];
    let mut running = S::zero();
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { bootstrap_value } else { values[t + 1] };
        let live = if dones[t] { S::zero() } else { S::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize<S: Scalar>(v: &mut [S]) {
    if v.is_empty() {
        return;
    }
    let n = S::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<S>() / n;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / n;
    let std = var.sqrt() + S::lit(1e-8);
    v.iter_mut().for_each(|x| *x = (*x - mean) / std);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[1.0f64], &[0.0], &[true], 5.0, 0.99, 0.95);
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn undiscounted_telescopes() {
        let rewards = [0.5f64, -1.0, 2.0, 0.25];
        let values = [0.1f64, 0.7, -0.3, 1.2];
        let boot = 0.9;
        let (a, _) = compute_gae(&rewards, &values, &[false; 4], boot, 1.0, 1.0);
        for t in 0..4 {
            let want = rewards[t..].iter().sum::<f64>() + boot - values[t];
            assert!((a[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_unrolled_three_steps() {
        // deltas: d2 = 1 - 0.5 = 0.5; d1 = 0 + 0.99*0.5 - 0.5 = -0.005; d0 = -0.005
        // A2 = 0.5; A1 = -0.005 + 0.9405*0.5 = 0.46525; A0 = -0.005 + 0.9405*0.46525
        let (a, r) = compute_gae(&[0.0f64, 0.0, 1.0], &[0.5; 3], &[false, false, true], 3.0, 0.99, 0.95);
        let want = [-0.005 + 0.9405 * 0.46525, 0.46525, 0.5];
        for t in 0..3 {
            assert!((a[t] - want[t]).abs() < 1e-12, "{t}: {} vs {}", a[t], want[t]);
            assert!((r[t] - (want[t] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_lambda_is_td_residual() {
        let rewards = [0.3f64, 0.0, 1.0, -0.2, 0.6];
        let values = [0.2f64, 0.4, -0.1, 0.8, 0.5];
        let dones = [false, true, false, false, false];
        let (a, _) = compute_gae(&rewards, &values, &dones, 0.7, 0.99, 0.0);
        for t in 0..5 {
            let next = if t == 4 { 0.7 } else { values[t + 1] };
            let live = if dones[t] { 0.0 } else { 1.0 };
            assert_eq!(a[t], rewards[t] + 0.99 * next * live - values[t]);
        }
    }

    #[test]
    fn normalization_moments() {
        let mut v: Vec<f64> = (0..257).map(|i| ((i * 37) % 101) as f64 * 0.3 - 4.0).collect();
        normalize(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
    }
}
