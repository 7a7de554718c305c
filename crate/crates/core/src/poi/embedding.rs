use rand::Rng;

use crate::error::{reject, Error, Result};
use crate::interest::InterestField;
use crate::nn::{Activation, Dropout, FeedforwardNet, NetSpec, OptimizerState};
use crate::ppo::ActorCritic;
use crate::sampler::ObservationSource;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    /// Embedding size `q`.
    pub embedding_dim: usize,
    /// Applications of the update model per refresh (`k`).
    pub embedding_update_iters: usize,
    /// Observations in the held-out term of the training loss (`s_e`).
    pub eval_samples: usize,
    /// Hidden width of the per-observation encoder and of both heads.
    pub hidden: usize,
    /// Size of the pooled set representation.
    pub set_features: usize,
    pub learning_rate: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            embedding_dim: 32,
            embedding_update_iters: 4,
            eval_samples: 100,
            hidden: 64,
            set_features: 32,
            learning_rate: 0.001,
        }
    }
}

/// Maps a set of (observation, interest) pairs and the current embedding to a new embedding.
pub trait EmbeddingUpdate<S: Scalar> {
    fn embedding_dim(&self) -> usize;

    fn apply(&self, x: &[S], poi: &[S], e: &[S]) -> Result<Vec<S>>;
}

/// Update model `U` (a permutation-invariant set encoder) and prediction model `P`.
///
/// `U(X, I, e) = rho([mean_i phi([x_i, I_i]), e])`, with `rho` ending in a sigmoid so the
/// embedding stays in the unit cube; `P(x, e)` regresses the interest of `x`.
#[derive(Debug, Clone)]
pub struct PoiEmbedding<S> {
    pub phi: FeedforwardNet<S>,
    pub rho: FeedforwardNet<S>,
    pub predictor: FeedforwardNet<S>,
    obs_dim: usize,
    q: usize,
    pub(super) opts: [OptimizerState<S>; 3],
}

impl<S: Scalar> PoiEmbedding<S> {
    pub fn new<R: Rng>(obs_dim: usize, cfg: &EmbeddingConfig, rng: &mut R) -> Result<Self> {
        let q = cfg.embedding_dim;
        if q == 0 || cfg.hidden == 0 || cfg.set_features == 0 {
            return Err(Error::Config("embedding sizes must be positive".into()));
        }
        let act = Activation::LeakyRelu;
        let phi = FeedforwardNet::new(&NetSpec::new(vec![obs_dim + 1, cfg.hidden, cfg.set_features], act, act), rng)?;
        let rho = FeedforwardNet::new(
            &NetSpec::new(vec![cfg.set_features + q, cfg.hidden, q], act, Activation::Sigmoid),
            rng,
        )?;
        let predictor =
            FeedforwardNet::new(&NetSpec::new(vec![obs_dim + q, cfg.hidden, 1], act, Activation::Identity), rng)?;
        let lr = cfg.learning_rate;
        let opts = [
            OptimizerState::adam(lr, phi.num_params()),
            OptimizerState::adam(lr, rho.num_params()),
            OptimizerState::adam(lr, predictor.num_params()),
        ];
        Ok(PoiEmbedding { phi, rho, predictor, obs_dim, q, opts })
    }

    /// Starting embedding: the centre of the unit cube.
    pub fn initial_embedding(&self) -> Vec<S> {
        vec![S::lit(0.5); self.q]
    }

    /// `P(x, e)` for `n` observations sharing one embedding.
    pub fn predict(&self, x: &[S], n: usize, e: &[S]) -> Result<Vec<S>> {
        let input = self.predictor_input(x, n, e)?;
        self.predictor.predict_batch(&input, n, Dropout::Off)
    }

    fn set_input(&self, x: &[S], poi: &[S]) -> Result<Vec<S>> {
        let n = poi.len();
        if n == 0 || x.len() != n * self.obs_dim {
            return reject("update model needs a non-empty set of observations with interest values");
        }
        let mut input = Vec::with_capacity(n * (self.obs_dim + 1));
        for (row, &p) in x.chunks(self.obs_dim).zip(poi) {
            input.extend_from_slice(row);
            input.push(p);
        }
        Ok(input)
    }

    fn predictor_input(&self, x: &[S], n: usize, e: &[S]) -> Result<Vec<S>> {
        if e.len() != self.q {
            return Err(Error::Config(format!("embedding of size {} for q = {}", e.len(), self.q)));
        }
        if x.len() != n * self.obs_dim {
            return reject("observation buffer does not match sample count");
        }
        let mut input = Vec::with_capacity(n * (self.obs_dim + self.q));
        for row in x.chunks(self.obs_dim) {
            input.extend_from_slice(row);
            input.extend_from_slice(e);
        }
        Ok(input)
    }

    fn pooled(&self, phi_out: &[S], n: usize) -> Vec<S> {
        let f = self.phi.output_dim();
        let mut pool = vec![S::zero(); f];
        for row in phi_out.chunks(f) {
            pool.iter_mut().zip(row).for_each(|(p, &v)| *p += v);
        }
        let ns = S::from_usize_lossy(n);
        pool.iter_mut().for_each(|p| *p /= ns);
        pool
    }

    /// One joint gradient step of `U` and `P` on
    /// `MSE(P(X, e'), I) + MSE(P(X_e, e'), I_e)` with `e' = U(X, I, e)`.
    ///
    /// Pass an empty `x_eval` to drop the held-out term. Returns the loss before the step.
    pub fn train_step(&mut self, x: &[S], poi: &[S], x_eval: &[S], poi_eval: &[S], e: &[S]) -> Result<f64> {
        let (s, s_e) = (poi.len(), poi_eval.len());
        let set_in = self.set_input(x, poi)?;
        let phi_tr = self.phi.forward_trace(&set_in, s, Dropout::Off)?;
        let pool = self.pooled(phi_tr.output(), s);
        let mut rho_in = pool;
        if e.len() != self.q {
            return Err(Error::Config(format!("embedding of size {} for q = {}", e.len(), self.q)));
        }
        rho_in.extend_from_slice(e);
        let rho_tr = self.rho.forward_trace(&rho_in, 1, Dropout::Off)?;
        let e_new = rho_tr.output().to_vec();

        let all_x: Vec<S> = x.iter().chain(x_eval).copied().collect();
        let rows = s + s_e;
        let p_in = self.predictor_input(&all_x, rows, &e_new)?;
        let p_tr = self.predictor.forward_trace(&p_in, rows, Dropout::Off)?;
        let (mut loss_fit, mut loss_eval) = (0.0, 0.0);
        let mut up = vec![S::zero(); rows];
        for (r, (&y, &t)) in p_tr.output().iter().zip(poi.iter().chain(poi_eval)).enumerate() {
            let res = y - t;
            let (count, acc) = if r < s { (s, &mut loss_fit) } else { (s_e, &mut loss_eval) };
            *acc += (res * res).as_f64() / count as f64;
            up[r] = S::lit(2.0) * res / S::from_usize_lossy(count);
        }
        let loss = loss_fit + loss_eval;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("embedding loss {loss}")));
        }

        let mut g_p = vec![S::zero(); self.predictor.num_params()];
        let d_in = self.predictor.backward(&p_tr, &up, &mut g_p, true).expect("input gradient");
        let width = self.obs_dim + self.q;
        let mut d_e = vec![S::zero(); self.q];
        for row in d_in.chunks(width) {
            d_e.iter_mut().zip(&row[self.obs_dim..]).for_each(|(a, &v)| *a += v);
        }
        let mut g_rho = vec![S::zero(); self.rho.num_params()];
        let d_rho_in = self.rho.backward(&rho_tr, &d_e, &mut g_rho, true).expect("input gradient");
        let f = self.phi.output_dim();
        let ns = S::from_usize_lossy(s);
        let d_pool: Vec<S> = d_rho_in[..f].iter().map(|&v| v / ns).collect();
        let up_phi: Vec<S> = d_pool.iter().copied().cycle().take(s * f).collect();
        let mut g_phi = vec![S::zero(); self.phi.num_params()];
        self.phi.backward(&phi_tr, &up_phi, &mut g_phi, false);

        self.opts[0].step(self.phi.params_mut(), &g_phi)?;
        self.opts[1].step(self.rho.params_mut(), &g_rho)?;
        self.opts[2].step(self.predictor.params_mut(), &g_p)?;
        Ok(loss)
    }

    /// Loss of the current models without updating them.
    pub fn loss(&self, x: &[S], poi: &[S], x_eval: &[S], poi_eval: &[S], e: &[S]) -> Result<(f64, f64)> {
        let e_new = self.apply(x, poi, e)?;
        let fit = self.predict(x, poi.len(), &e_new)?;
        let eval = self.predict(x_eval, poi_eval.len(), &e_new)?;
        Ok((mean_sq(&fit, poi), mean_sq(&eval, poi_eval)))
    }
}

fn mean_sq<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum::<f64>() / b.len() as f64
}

impl<S: Scalar> EmbeddingUpdate<S> for PoiEmbedding<S> {
    fn embedding_dim(&self) -> usize {
        self.q
    }

    fn apply(&self, x: &[S], poi: &[S], e: &[S]) -> Result<Vec<S>> {
        if e.len() != self.q {
            return Err(Error::Config(format!("embedding of size {} for q = {}", e.len(), self.q)));
        }
        let set_in = self.set_input(x, poi)?;
        let h = self.phi.predict_batch(&set_in, poi.len(), Dropout::Off)?;
        let mut rho_in = self.pooled(&h, poi.len());
        rho_in.extend_from_slice(e);
        self.rho.predict_batch(&rho_in, 1, Dropout::Off)
    }
}

/// Samples fresh sets and takes one joint training step of the update and prediction models.
pub fn train_embedding_models<S, F, O>(
    models: &mut PoiEmbedding<S>,
    e: &[S],
    source: &mut O,
    field: &F,
    s: usize,
    s_e: usize,
) -> Result<f64>
where
    S: Scalar,
    F: InterestField<S> + ?Sized,
    O: ObservationSource<S> + ?Sized,
{
    if s == 0 {
        return Err(Error::Config("embedding training needs s >= 1".into()));
    }
    let x = source.sample_observations(s)?;
    let poi = field.interest_batch(&x, s)?;
    let x_e = source.sample_observations(s_e)?;
    let poi_e = field.interest_batch(&x_e, s_e)?;
    models.train_step(&x, &poi, &x_e, &poi_e, e)
}

/// Applies the update model `k` times, each on a fresh sample.
pub fn update_embedding<S, U, F, O>(update: &U, e: &[S], source: &mut O, field: &F, s: usize, k: usize) -> Result<Vec<S>>
where
    S: Scalar,
    U: EmbeddingUpdate<S> + ?Sized,
    F: InterestField<S> + ?Sized,
    O: ObservationSource<S> + ?Sized,
{
    if k == 0 {
        return Err(Error::Config("embedding_update_iters must be at least 1".into()));
    }
    let mut e = e.to_vec();
    for _ in 0..k {
        let x = source.sample_observations(s)?;
        let poi = field.interest_batch(&x, s)?;
        e = update.apply(&x, &poi, &e)?;
        if e.len() != update.embedding_dim() {
            return Err(Error::Invariant(format!("update model returned {} values", e.len())));
        }
        if let Some(v) = e.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding entry {v} in {e:?}")));
        }
    }
    Ok(e)
}

/// Action distribution of an embedding-conditioned policy.
pub fn condition_policy_on_embedding<S: Scalar>(policy: &ActorCritic<S>, obs: &[S], e: &[S]) -> Result<Vec<S>> {
    if policy.embed_dim() != e.len() {
        return Err(Error::Config(format!(
            "policy expects an embedding of size {}, got {}",
            policy.embed_dim(),
            e.len()
        )));
    }
    if policy.num_skills() > 0 {
        return Err(Error::Config("embedding-conditioned policies take no skill input".into()));
    }
    policy.action_probs(obs, &[None], e)
}
