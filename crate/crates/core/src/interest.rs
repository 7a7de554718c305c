//! Interest fields: scalar scores over observation space saying how useful observing a
//! point would be to the external model.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::env::OBS_DIM;
use crate::error::{reject, Error, Result};
use crate::external_model::ExternalModel;
use crate::nn::{derive_seed, Dropout, DropoutMask};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    McDropout,
    JacobianNorm,
    Staleness,
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc_dropout" => Ok(FieldKind::McDropout),
            "jacobian_norm" => Ok(FieldKind::JacobianNorm),
            "staleness" => Ok(FieldKind::Staleness),
            other => Err(Error::Config(format!("unknown interest field {other:?}"))),
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldKind::McDropout => "mc_dropout",
            FieldKind::JacobianNorm => "jacobian_norm",
            FieldKind::Staleness => "staleness",
        })
    }
}

/// A scalar interest score defined on every observation, including sampled ones.
pub trait InterestField<S: Scalar> {
    fn kind(&self) -> FieldKind;

    /// Interest of `n` row-major observations.
    fn interest_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>>;

    fn interest(&self, obs: &[S]) -> Result<S> {
        Ok(self.interest_batch(obs, 1)?[0])
    }
}

/// Unbiased (divisor `N - 1`) sample variance, computed with Welford's update so that
/// identical samples give exactly zero.
pub fn sample_variance<S: Scalar>(xs: &[S]) -> S {
    let mut mean = S::zero();
    let mut m2 = S::zero();
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / S::from_usize_lossy(i + 1);
        m2 += delta * (x - mean);
    }
    m2 / S::from_usize_lossy(xs.len() - 1)
}

/// Disagreement between `N` dropout samples of the external model, summed over outputs.
#[derive(Debug, Clone)]
pub struct McDropoutField<'a, S> {
    model: &'a ExternalModel<S>,
    masks: Vec<DropoutMask<S>>,
}

impl<'a, S: Scalar> McDropoutField<'a, S> {
    /// Masks are fixed by `seed`, so interest is a pure function of model and observation.
    pub fn new(model: &'a ExternalModel<S>, num_samples: usize, seed: u64) -> Result<Self> {
        if num_samples < 2 {
            return Err(Error::Config(format!("num_mc_dropout_samples must be at least 2, got {num_samples}")));
        }
        let masks = (0..num_samples as u64).map(|i| model.net.sample_mask(derive_seed(seed, i))).collect();
        Ok(McDropoutField { model, masks })
    }

    pub fn num_samples(&self) -> usize {
        self.masks.len()
    }
}

impl<S: Scalar> InterestField<S> for McDropoutField<'_, S> {
    fn kind(&self) -> FieldKind {
        FieldKind::McDropout
    }

    fn interest_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let d = self.model.output_dim();
        let draws = self.model.net.forward_multi_mask(obs, n, &self.masks)?;
        let mut column = vec![S::zero(); draws.len()];
        let mut out = vec![S::zero(); n];
        for (r, o) in out.iter_mut().enumerate() {
            for k in 0..d {
                for (c, draw) in column.iter_mut().zip(&draws) {
                    *c = draw[r * d + k];
                }
                *o += sample_variance(&column);
            }
        }
        Ok(out)
    }
}

/// Frobenius norm of the Jacobian of the model outputs with respect to all parameters.
#[derive(Debug, Clone, Copy)]
pub struct JacobianNormField<'a, S> {
    model: &'a ExternalModel<S>,
}

impl<'a, S: Scalar> JacobianNormField<'a, S> {
    pub fn new(model: &'a ExternalModel<S>) -> Self {
        JacobianNormField { model }
    }

    /// Squared Jacobian norm split into weight and bias contributions.
    pub fn squared_parts(&self, obs: &[S], n: usize) -> Result<(Vec<S>, Vec<S>)> {
        let net = &self.model.net;
        let d = net.output_dim();
        let trace = net.forward_trace(obs, n, Dropout::Off)?;
        let mut weight = vec![S::zero(); n];
        let mut bias = vec![S::zero(); n];
        for k in 0..d {
            let mut up = vec![S::zero(); n * d];
            for r in 0..n {
                up[r * d + k] = S::one();
            }
            let (w, b) = net.per_sample_grad_sq_norms(&trace, &up);
            weight.iter_mut().zip(w).for_each(|(a, v)| *a += v);
            bias.iter_mut().zip(b).for_each(|(a, v)| *a += v);
        }
        Ok((weight, bias))
    }
}

impl<S: Scalar> InterestField<S> for JacobianNormField<'_, S> {
    fn kind(&self) -> FieldKind {
        FieldKind::JacobianNorm
    }

    fn interest_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let (w, b) = self.squared_parts(obs, n)?;
        Ok(w.into_iter().zip(b).map(|(w, b)| (w + b).sqrt()).collect())
    }
}

/// Last global step at which each key was observed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecencyTable<K: Hash + Eq> {
    last_seen: HashMap<K, u64>,
}

impl<K: Hash + Eq> RecencyTable<K> {
    pub fn new() -> Self {
        RecencyTable { last_seen: HashMap::new() }
    }

    /// Records an observation of `key` at `step`; entries never move backwards.
    pub fn touch(&mut self, key: K, step: u64) {
        let e = self.last_seen.entry(key).or_insert(step);
        *e = (*e).max(step);
    }

    pub fn last_seen(&self, key: &K) -> Option<u64> {
        self.last_seen.get(key).copied()
    }

    /// Steps since `key` was last observed; `current_step` if never.
    pub fn staleness(&self, key: &K, current_step: u64) -> u64 {
        self.last_seen(key).map_or(current_step, |s| current_step.saturating_sub(s))
    }

    pub fn len(&self) -> usize {
        self.last_seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_seen.is_empty()
    }
}

/// Place key decoded from an egocentric observation: a hash of the thresholded view.
///
/// The view does not reveal absolute coordinates, so identical surroundings share a key.
pub fn view_key<S: Scalar>(obs: &[S]) -> u64 {
    let half = S::lit(0.5);
    let mut h = DefaultHasher::new();
    for chunk in obs.chunks(64) {
        let mut bits = 0u64;
        for (i, &v) in chunk.iter().enumerate() {
            if v > half {
                bits |= 1 << i;
            }
        }
        bits.hash(&mut h);
    }
    h.finish()
}

/// Steps since the place an observation depicts was last observed.
#[derive(Debug, Clone)]
pub struct StalenessField<'a> {
    table: &'a RecencyTable<u64>,
    current_step: u64,
}

impl<'a> StalenessField<'a> {
    pub fn new(table: &'a RecencyTable<u64>, current_step: u64) -> Self {
        StalenessField { table, current_step }
    }
}

impl<S: Scalar> InterestField<S> for StalenessField<'_> {
    fn kind(&self) -> FieldKind {
        FieldKind::Staleness
    }

    fn interest_batch(&self, obs: &[S], n: usize) -> Result<Vec<S>> {
        if obs.len() != n * OBS_DIM {
            return reject(format!("staleness expects {OBS_DIM}-dimensional observations"));
        }
        Ok(obs
            .chunks(OBS_DIM)
            .map(|o| S::lit(self.table.staleness(&view_key(o), self.current_step) as f64))
            .collect())
    }
}

/// Scores every observation the same; useful as an influence-free reference.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField<S>(pub S);

impl<S: Scalar> InterestField<S> for ConstantField<S> {
    fn kind(&self) -> FieldKind {
        FieldKind::McDropout
    }

    fn interest_batch(&self, _obs: &[S], n: usize) -> Result<Vec<S>> {
        Ok(vec![self.0; n])
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::external_model::ExternalModelConfig;
    use crate::nn::{seeded_rng, Activation, FeedforwardNet};
    use rand::Rng;

    fn model(p: f64, sizes: Vec<usize>, seed: u64) -> ExternalModel<f64> {
        let cfg = ExternalModelConfig { layer_sizes: sizes, dropout_p: p, ..Default::default() };
        ExternalModel::new(&cfg, &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(sample_variance(&[1.0f64, 2.0, 3.0]), 1.0);
        assert_eq!(sample_variance(&[4.0f64; 30]), 0.0);
    }

    #[test]
    fn zero_dropout_gives_zero_interest() {
        let m = model(0.0, vec![8, 16, 4, 1], 1);
        let f = McDropoutField::new(&m, 30, 7).unwrap();
        let mut rng = seeded_rng(2);
        let obs: Vec<f64> = (0..8 * 50).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert!(f.interest_batch(&obs, 50).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mc_dropout_is_deterministic_and_nonnegative() {
        let m = model(0.5, vec![8, 16, 4, 1], 1);
        let f = McDropoutField::new(&m, 30, 7).unwrap();
        let mut rng = seeded_rng(3);
        let obs: Vec<f64> = (0..8 * 20).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = f.interest_batch(&obs, 20).unwrap();
        assert_eq!(a, McDropoutField::new(&m, 30, 7).unwrap().interest_batch(&obs, 20).unwrap());
        assert!(a.iter().all(|&v| v >= 0.0 && v.is_finite()));
        assert!(a.iter().any(|&v| v > 0.0));
        assert!((a[4] - f.interest(&obs[32..40]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mc_dropout_matches_explicit_variance() {
        let m = model(0.5, vec![5, 6, 3, 2], 4);
        let f = McDropoutField::new(&m, 10, 9).unwrap();
        let x = [0.3, 0.1, 0.9, 0.0, 1.0];
        let draws: Vec<Vec<f64>> = f.masks.iter().map(|mk| m.net.forward(&x, Some(mk)).unwrap()).collect();
        let expected: f64 = (0..2)
            .map(|k| sample_variance(&draws.iter().map(|d| d[k]).collect::<Vec<_>>()))
            .sum();
        assert!((f.interest(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn too_few_mc_samples_is_config_error() {
        let m = model(0.5, vec![4, 4, 1], 1);
        assert!(matches!(McDropoutField::new(&m, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn jacobian_of_linear_model() {
        let net = FeedforwardNet::<f64>::zeros(vec![3, 1], vec![Activation::Identity], 0.0).unwrap();
        let m = ExternalModel::from_net(net, 0.001, 8);
        let f = JacobianNormField::new(&m);
        let (w, b) = f.squared_parts(&[3.0, 4.0, 0.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(w, vec![25.0, 0.0]);
        assert_eq!(b, vec![1.0, 1.0]);
        assert_eq!(f.interest(&[3.0, 4.0, 0.0]).unwrap(), 26f64.sqrt());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = model(0.0, vec![4, 5, 3, 2], 5);
        let x = [0.2, -0.7, 0.5, 0.9];
        let analytic = JacobianNormField::new(&m).interest(&x).unwrap();
        let h = 1e-6;
        let mut fd = 0.0;
        for i in 0..m.net.num_params() {
            let mut plus = m.net.clone();
            plus.params_mut()[i] += h;
            let mut minus = m.net.clone();
            minus.params_mut()[i] -= h;
            let (a, b) = (plus.forward(&x, None).unwrap(), minus.forward(&x, None).unwrap());
            fd += a.iter().zip(&b).map(|(p, q)| ((p - q) / (2.0 * h)).powi(2)).sum::<f64>();
        }
        let fd = fd.sqrt();
        assert!((analytic - fd).abs() / fd < 1e-4, "{analytic} vs {fd}");
    }

    #[test]
    fn recency_table() {
        let mut t = RecencyTable::new();
        assert_eq!(t.staleness(&(1, 1), 1000), 1000);
        t.touch((1, 1), 10);
        t.touch((2, 1), 20);
        assert_eq!(t.staleness(&(1, 1), 30), 20);
        t.touch((1, 1), 30);
        assert_eq!(t.staleness(&(1, 1), 30), 0);
        assert_eq!(t.staleness(&(2, 1), 30), 10);
        t.touch((1, 1), 5);
        assert_eq!(t.last_seen(&(1, 1)), Some(30));
    }

    #[test]
    fn staleness_field_uses_view_keys() {
        let mut env = crate::env::DoorKeyChange::new(crate::env::EnvConfig::default()).unwrap();
        env.reset(0);
        let a: Vec<f64> = env.observe();
        env.step(0).unwrap();
        let b: Vec<f64> = env.observe();
        let mut t = RecencyTable::new();
        t.touch(view_key(&a), 500);
        let f = StalenessField::new(&t, 800);
        let both: Vec<f64> = a.iter().chain(&b).copied().collect();
        assert_eq!(f.interest_batch(&both, 2).unwrap(), vec![300.0, 800.0]);
    }

    #[test]
    fn field_names_round_trip() {
        for k in [FieldKind::McDropout, FieldKind::JacobianNorm, FieldKind::Staleness] {
            assert_eq!(k.to_string().parse::<FieldKind>().unwrap(), k);
        }
        assert!("entropy".parse::<FieldKind>().is_err());
    }
}
