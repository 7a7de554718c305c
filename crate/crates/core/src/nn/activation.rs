use std::fmt;
use std::str::FromStr;


use crate::error::Error;
use crate::Scalar;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Layer activations. Only the set used by the configured architectures is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Softmax,
    Sigmoid,
    Identity,
}

impl Activation {
    /// Applies the activation in place to a `rows x cols` block.
    pub fn apply<S: Scalar>(self, z: &mut [S], cols: usize) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| {
                if *v < S::zero() {
                    *v = S::zero()
                }
            }),
            Activation::LeakyRelu => {
                let slope = S::lit(LEAKY_SLOPE);
                z.iter_mut().for_each(|v| {
                    if *v < S::zero() {
                        *v *= slope
                    }
                })
            }
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Identity => {}
            Activation::Softmax => z.chunks_mut(cols).for_each(softmax_in_place),
        }
    }

    /// Maps `d(loss)/d(output)` to `d(loss)/d(pre-activation)` in place.
    ///
    /// `pre` holds pre-activations and `out` the activation outputs (before dropout).
    pub fn backprop<S: Scalar>(self, pre: &[S], out: &[S], grad: &mut [S], cols: usize) {
        match self {
            Activation::Relu => grad.iter_mut().zip(pre).for_each(|(g, &z)| {
                if z <= S::zero() {
                    *g = S::zero()
                }
            }),
            Activation::LeakyRelu => {
                let slope = S::lit(LEAKY_SLOPE);
                grad.iter_mut().zip(pre).for_each(|(g, &z)| {
                    if z <= S::zero() {
                        *g *= slope
                    }
                })
            }
            Activation::Sigmoid => grad
                .iter_mut()
                .zip(out)
                .for_each(|(g, &y)| *g *= y * (S::one() - y)),
            Activation::Identity => {}
            Activation::Softmax => {
                for (g, p) in grad.chunks_mut(cols).zip(out.chunks(cols)) {
                    let inner: S = g.iter().zip(p).map(|(&a, &b)| a * b).sum();
                    g.iter_mut().zip(p).for_each(|(gv, &pv)| *gv = pv * (*gv - inner));
                }
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "leakyrelu" | "leaky_relu" => Ok(Activation::LeakyRelu),
            "softmax" => Ok(Activation::Softmax),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unsupported activation '{other}'"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Relu => "ReLU",
            Activation::LeakyRelu => "LeakyReLU",
            Activation::Softmax => "Softmax",
            Activation::Sigmoid => "Sigmoid",
            Activation::Identity => "Identity",
        };
        f.write_str(s)
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

pub(crate) fn softmax_in_place<S: Scalar>(v: &mut [S]) {
    let max = v.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Numerically stable softmax. Rejects NaN entries.
pub fn softmax<S: Scalar>(v: &[S]) -> crate::Result<Vec<S>> {
    if v.iter().any(|x| !x.is_finite()) {
        return crate::error::reject("softmax input contains non-finite entries");
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// `log softmax` of one row.
pub fn log_softmax<S: Scalar>(v: &[S]) -> Vec<S> {
    let max = v.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = v.iter().map(|&x| (x - max).exp()).sum::<S>().ln() + max;
    v.iter().map(|&x| x - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[1.0f64, 1.0, 1.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[0.0f64, 2f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-12);

        let v = [0.3f64, -1.2, 4.0, 0.0];
        let shifted: Vec<f64> = v.iter().map(|x| x + 100.0).collect();
        let (a, b) = (softmax(&v).unwrap(), softmax(&shifted).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(softmax(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn parse_rejects_unknown() {
        assert_eq!("LeakyReLU".parse::<Activation>().unwrap(), Activation::LeakyRelu);
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let v = [0.5f64, -2.0, 3.0];
        let p = softmax(&v).unwrap();
        for (l, q) in log_softmax(&v).iter().zip(&p) {
            assert!((l - q.ln()).abs() < 1e-12);
        }
    }
}
