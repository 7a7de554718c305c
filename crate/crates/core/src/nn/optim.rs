use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain gradient descent: `p -= lr * g`.
    Sgd,
    /// Adam with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First-order optimizer state for one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct OptimizerState<S> {
    pub learning_rate: f64,
    kind: OptimizerKind,
    first: Vec<S>,
    second: Vec<S>,
    steps: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Self {
        let moments = matches!(kind, OptimizerKind::Adam { .. });
        OptimizerState {
            learning_rate,
            kind,
            first: if moments { vec![S::zero(); num_params] } else { Vec::new() },
            second: if moments { vec![S::zero(); num_params] } else { Vec::new() },
            steps: 0,
        }
    }

    pub fn adam(learning_rate: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::adam(), learning_rate, num_params)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Non-finite gradients abort without touching `params`.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::RejectedInput(format!(
                "{} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {i} is {} at optimizer step {}",
                grads[i], self.steps
            )));
        }
        self.steps += 1;
        let lr = S::lit(self.learning_rate);
        match self.kind {
            OptimizerKind::Sgd => {
                params.iter_mut().zip(grads).for_each(|(p, &g)| *p -= lr * g);
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = S::lit(1.0 - beta1.powi(t));
                let c2 = S::lit(1.0 - beta2.powi(t));
                let (b1, b2, eps) = (S::lit(beta1), S::lit(beta2), S::lit(eps));
                let one = S::one();
                for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
