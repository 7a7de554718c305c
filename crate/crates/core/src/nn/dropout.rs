use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Scalar;

/// Per-unit keep indicators for every hidden layer, scaled by `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<S> {
    pub seed: u64,
    pub layers: Vec<Vec<S>>,
}

impl<S: Scalar> DropoutMask<S> {
    /// Draws a mask for the given hidden layer widths. Same seed, same mask.
    pub fn sample(hidden: &[usize], p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = hidden.iter().map(|&n| keep_vector(n, p, &mut rng)).collect();
        DropoutMask { seed, layers }
    }

    pub fn ones(hidden: &[usize]) -> Self {
        DropoutMask {
            seed: 0,
            layers: hidden.iter().map(|&n| vec![S::one(); n]).collect(),
        }
    }
}

/// Row-major masks for a whole batch: one `batch x units` block per hidden layer.
#[derive(Debug, Clone)]
pub struct MaskBatch<S> {
    pub layers: Vec<Vec<S>>,
}

impl<S: Scalar> MaskBatch<S> {
    pub fn sample<R: Rng>(hidden: &[usize], batch: usize, p: f64, rng: &mut R) -> Self {
        MaskBatch {
            layers: hidden.iter().map(|&n| keep_vector(n * batch, p, rng)).collect(),
        }
    }
}

fn keep_vector<S: Scalar, R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<S> {
    if p <= 0.0 {
        return vec![S::one(); n];
    }
    if p >= 1.0 {
        return vec![S::zero(); n];
    }
    let scale = S::lit(1.0 / (1.0 - p));
    (0..n)
        .map(|_| if rng.gen::<f64>() < p { S::zero() } else { scale })
        .collect()
}

/// How dropout is applied during a batched forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Dropout<'a, S> {
    Off,
    /// One mask shared by every row of the batch.
    Shared(&'a DropoutMask<S>),
    PerSample(&'a MaskBatch<S>),
}
