use rand::Rng;

use super::activation::Activation;
use super::dropout::{Dropout, DropoutMask};
use crate::error::{reject, Error, Result};
use crate::scalar::linalg::{gemm_nn, gemm_nt, gemm_tn, norm_sq};
use crate::Scalar;

/// Architecture description for a [`FeedforwardNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    /// Dropout probability after every hidden layer when a mask is supplied.
    pub dropout_p: f64,
    /// Extra multiplier on the output layer's initial weights.
    pub output_gain: f64,
}

impl NetSpec {
    pub fn new(sizes: impl Into<Vec<usize>>, hidden: Activation, output: Activation) -> Self {
        NetSpec {
            sizes: sizes.into(),
            hidden,
            output,
            dropout_p: 0.0,
            output_gain: 1.0,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn with_output_gain(mut self, gain: f64) -> Self {
        self.output_gain = gain;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {:?}", self.sizes)));
        }
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0,1]", self.dropout_p)));
        }
        if self.hidden == Activation::Softmax {
            return Err(Error::Config("Softmax is only supported as a final activation".into()));
        }
        Ok(())
    }
}

/// Dense feedforward network with all parameters in one flat buffer.
///
/// Layer `l` stores its `in x out` row-major weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet<S> {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    dropout_p: f64,
    offsets: Vec<usize>,
    params: Vec<S>,
}

/// Intermediate values of a batched forward pass, consumed by [`FeedforwardNet::backward`].
#[derive(Debug, Clone)]
pub struct Trace<S> {
    pub batch: usize,
    input: Vec<S>,
    pre: Vec<Vec<S>>,
    act: Vec<Vec<S>>,
    masks: Vec<Option<Vec<S>>>,
    post: Vec<Vec<S>>,
}

impl<S: Scalar> Trace<S> {
    /// Final-layer activations, `batch x out` row-major.
    pub fn output(&self) -> &[S] {
        self.post.last().expect("at least one layer")
    }
}

impl<S: Scalar> FeedforwardNet<S> {
    pub fn new<R: Rng>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let n_layers = spec.sizes.len() - 1;
        let mut activations = vec![spec.hidden; n_layers];
        activations[n_layers - 1] = spec.output;
        let mut net = FeedforwardNet::zeros(spec.sizes.clone(), activations, spec.dropout_p)?;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let act = net.activations[l];
            let mut limit = match act {
                Activation::Relu | Activation::LeakyRelu => (6.0 / fan_in as f64).sqrt(),
                _ => (3.0 / fan_in as f64).sqrt(),
            };
            if l + 1 == n_layers {
                limit *= spec.output_gain;
            }
            let w = net.offsets[l];
            for v in &mut net.params[w..w + fan_in * fan_out] {
                *v = S::lit(rng.gen_range(-1.0..=1.0) * limit);
            }
        }
        Ok(net)
    }

    /// All-zero parameters with explicit per-layer activations.
    pub fn zeros(sizes: Vec<usize>, activations: Vec<Activation>, dropout_p: f64) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations for layer sizes {:?}",
                activations.len(),
                sizes
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        Ok(FeedforwardNet {
            sizes,
            activations,
            dropout_p,
            offsets,
            params: vec![S::zero(); total],
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    pub fn set_dropout_p(&mut self, p: f64) {
        self.dropout_p = p;
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    /// Range of layer `l`'s weights inside the flat parameter buffer.
    pub fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.sizes[l] * self.sizes[l + 1]
    }

    pub fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let w = self.weight_range(l);
        w.end..w.end + self.sizes[l + 1]
    }

    /// Draws a dropout mask sized for this network's hidden layers.
    pub fn sample_mask(&self, seed: u64) -> DropoutMask<S> {
        DropoutMask::sample(self.hidden_sizes(), self.dropout_p, seed)
    }

    /// Single-input forward pass, optionally with a dropout mask on hidden layers.
    pub fn forward(&self, x: &[S], mask: Option<&DropoutMask<S>>) -> Result<Vec<S>> {
        let dropout = mask.map_or(Dropout::Off, Dropout::Shared);
        self.predict_batch(x, 1, dropout)
    }

    /// Batched forward pass without keeping intermediates.
    pub fn predict_batch(&self, x: &[S], batch: usize, dropout: Dropout<'_, S>) -> Result<Vec<S>> {
        self.check_input(x, batch)?;
        self.check_dropout(batch, &dropout)?;
        let mut cur = x.to_vec();
        for l in 0..self.num_layers() {
            let mut z = self.affine(l, &cur, batch);
            self.activations[l].apply(&mut z, self.sizes[l + 1]);
            if l + 1 < self.num_layers() {
                apply_mask(&mut z, l, self.sizes[l + 1], &dropout);
            }
            cur = z;
        }
        Ok(cur)
    }

    /// Batched forward pass recording intermediates for backpropagation.
    pub fn forward_trace(&self, x: &[S], batch: usize, dropout: Dropout<'_, S>) -> Result<Trace<S>> {
        self.check_input(x, batch)?;
        self.check_dropout(batch, &dropout)?;
        let n = self.num_layers();
        let mut trace = Trace {
            batch,
            input: x.to_vec(),
            pre: Vec::with_capacity(n),
            act: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        for l in 0..n {
            let input = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let z = self.affine(l, input, batch);
            let mut a = z.clone();
            self.activations[l].apply(&mut a, self.sizes[l + 1]);
            let mask = if l + 1 < n {
                materialize_mask(l, self.sizes[l + 1], batch, &dropout)
            } else {
                None
            };
            let post = match &mask {
                Some(m) => a.iter().zip(m).map(|(&v, &k)| v * k).collect(),
                None => a.clone(),
            };
            trace.pre.push(z);
            trace.act.push(a);
            trace.masks.push(mask);
            trace.post.push(post);
        }
        Ok(trace)
    }

    /// Accumulates parameter gradients of `sum(upstream . output)` into `grads`.
    ///
    /// Returns the gradient with respect to the input when `want_input` is set.
    pub fn backward(&self, trace: &Trace<S>, upstream: &[S], grads: &mut [S], want_input: bool) -> Option<Vec<S>> {
        let batch = trace.batch;
        assert_eq!(upstream.len(), batch * self.output_dim(), "upstream gradient shape");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer shape");
        let mut g = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if let Some(mask) = &trace.masks[l] {
                g.iter_mut().zip(mask).for_each(|(gv, &m)| *gv *= m);
            }
            self.activations[l].backprop(&trace.pre[l], &trace.act[l], &mut g, fan_out);
            let input = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let wr = self.weight_range(l);
            gemm_tn(batch, fan_in, fan_out, input, &g, S::one(), &mut grads[wr.clone()]);
            let br = self.bias_range(l);
            let db = &mut grads[br];
            for row in g.chunks(fan_out) {
                db.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
            }
            if l > 0 || want_input {
                let mut prev = vec![S::zero(); batch * fan_in];
                gemm_nt(batch, fan_out, fan_in, &g, &self.params[wr], S::zero(), &mut prev);
                g = prev;
            } else {
                return None;
            }
        }
        Some(g)
    }

    /// Per-sample squared norms of the parameter gradient of `upstream . output`,
    /// split into weight and bias parts.
    ///
    /// Each sample's weight gradient for a layer is the outer product of its input row and
    /// its backpropagated signal, so its squared norm factorizes into a product of row norms.
    pub fn per_sample_grad_sq_norms(&self, trace: &Trace<S>, upstream: &[S]) -> (Vec<S>, Vec<S>) {
        let batch = trace.batch;
        assert_eq!(upstream.len(), batch * self.output_dim(), "upstream gradient shape");
        let mut weight_sq = vec![S::zero(); batch];
        let mut bias_sq = vec![S::zero(); batch];
        let mut g = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if let Some(mask) = &trace.masks[l] {
                g.iter_mut().zip(mask).for_each(|(gv, &m)| *gv *= m);
            }
            self.activations[l].backprop(&trace.pre[l], &trace.act[l], &mut g, fan_out);
            let input = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            for r in 0..batch {
                let delta = norm_sq(&g[r * fan_out..(r + 1) * fan_out]);
                weight_sq[r] += delta * norm_sq(&input[r * fan_in..(r + 1) * fan_in]);
                bias_sq[r] += delta;
            }
            if l > 0 {
                let mut prev = vec![S::zero(); batch * fan_in];
                gemm_nt(batch, fan_out, fan_in, &g, &self.params[self.weight_range(l)], S::zero(), &mut prev);
                g = prev;
            }
        }
        (weight_sq, bias_sq)
    }

    /// Outputs under each of several shared masks, reusing the first affine layer.
    ///
    /// Returns one `batch x out` block per mask.
    pub fn forward_multi_mask(&self, x: &[S], batch: usize, masks: &[DropoutMask<S>]) -> Result<Vec<Vec<S>>> {
        self.check_input(x, batch)?;
        for m in masks {
            self.check_dropout(batch, &Dropout::Shared(m))?;
        }
        let n = self.num_layers();
        let mut first = self.affine(0, x, batch);
        self.activations[0].apply(&mut first, self.sizes[1]);
        if n == 1 {
            return Ok(vec![first; masks.len()]);
        }
        let mut outs = Vec::with_capacity(masks.len());
        for m in masks {
            let mut cur = first.clone();
            apply_mask(&mut cur, 0, self.sizes[1], &Dropout::Shared(m));
            for l in 1..n {
                let mut z = self.affine(l, &cur, batch);
                self.activations[l].apply(&mut z, self.sizes[l + 1]);
                if l + 1 < n {
                    apply_mask(&mut z, l, self.sizes[l + 1], &Dropout::Shared(m));
                }
                cur = z;
            }
            outs.push(cur);
        }
        Ok(outs)
    }

    fn affine(&self, l: usize, input: &[S], batch: usize) -> Vec<S> {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let bias = &self.params[self.bias_range(l)];
        let mut z = Vec::with_capacity(batch * fan_out);
        for _ in 0..batch {
            z.extend_from_slice(bias);
        }
        gemm_nn(batch, fan_in, fan_out, input, &self.params[self.weight_range(l)], S::one(), &mut z);
        z
    }

    fn check_input(&self, x: &[S], batch: usize) -> Result<()> {
        if x.len() != batch * self.input_dim() {
            return reject(format!(
                "input length {} does not match batch {} x input dim {}",
                x.len(),
                batch,
                self.input_dim()
            ));
        }
        Ok(())
    }

    fn check_dropout(&self, batch: usize, dropout: &Dropout<'_, S>) -> Result<()> {
        let hidden = self.hidden_sizes();
        let ok = match dropout {
            Dropout::Off => true,
            Dropout::Shared(m) => {
                m.layers.len() == hidden.len() && m.layers.iter().zip(hidden).all(|(l, &h)| l.len() == h)
            }
            Dropout::PerSample(m) => {
                m.layers.len() == hidden.len() && m.layers.iter().zip(hidden).all(|(l, &h)| l.len() == h * batch)
            }
        };
        if ok {
            Ok(())
        } else {
            reject("dropout mask shape does not match hidden layers")
        }
    }
}

fn apply_mask<S: Scalar>(z: &mut [S], layer: usize, cols: usize, dropout: &Dropout<'_, S>) {
    match dropout {
        Dropout::Off => {}
        Dropout::Shared(m) => {
            let mask = &m.layers[layer];
            for row in z.chunks_mut(cols) {
                row.iter_mut().zip(mask).for_each(|(v, &k)| *v *= k);
            }
        }
        Dropout::PerSample(m) => z.iter_mut().zip(&m.layers[layer]).for_each(|(v, &k)| *v *= k),
    }
}

fn materialize_mask<S: Scalar>(layer: usize, cols: usize, batch: usize, dropout: &Dropout<'_, S>) -> Option<Vec<S>> {
    match dropout {
        Dropout::Off => None,
        Dropout::Shared(m) => Some(m.layers[layer].iter().copied().cycle().take(cols * batch).collect()),
        Dropout::PerSample(m) => Some(m.layers[layer].clone()),
    }
}

/// Scales `grads` so that their joint Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<S: Scalar>(grads: &mut [&mut [S]], max_norm: S) -> S {
    let total: S = grads.iter().map(|g| g.iter().map(|&v| v * v).sum::<S>()).sum::<S>().sqrt();
    if total > max_norm {
        let scale = max_norm / (total + S::lit(1e-6));
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    total
}
