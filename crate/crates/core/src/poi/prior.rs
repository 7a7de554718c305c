use rand::Rng;

use crate::diayn::SkillPosterior;
use crate::error::{reject, Error, Result};
use crate::interest::InterestField;
use crate::nn::softmax;
use crate::ppo::sample_categorical;
use crate::sampler::ObservationSource;
use crate::Scalar;

/// Below this total posterior mass a skill's average interest is undefined.
pub const DEGENERATE_MASS: f64 = 1e-6;

/// Mixture of a uniform prior (weight `eta`) and an interest softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillPrior {
    probs: Vec<f64>,
    eta: f64,
}

impl SkillPrior {
    pub fn uniform(w: usize) -> Self {
        SkillPrior { probs: vec![1.0 / w as f64; w], eta: 1.0 }
    }

    /// `p(z) = eta / w + (1 - eta) softmax(A)_z`.
    pub fn from_averages(averages: &[f64], eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Config(format!("eta {eta} outside [0, 1]")));
        }
        if averages.is_empty() {
            return reject("no skills to weight");
        }
        let w = averages.len() as f64;
        let soft = softmax(averages)?;
        let probs = soft.iter().map(|&s| eta / w + (1.0 - eta) * s).collect();
        Ok(SkillPrior { probs, eta })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn num_skills(&self) -> usize {
        self.probs.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        sample_categorical(self.probs.iter().copied(), rng)
    }
}

/// Posterior-weighted mean interest per skill:
/// `A_z = sum_x Q(z|x) I_x / sum_x Q(z|x)`.
///
/// A skill whose total posterior mass is below [`DEGENERATE_MASS`] gets the smallest
/// defined average, or zero when no skill has mass.
pub fn skill_interest_averages<S: Scalar>(interest: &[S], posteriors: &[S], w: usize) -> Result<Vec<f64>> {
    if posteriors.len() != interest.len() * w {
        return reject(format!("{} posteriors for {} observations and {w} skills", posteriors.len(), interest.len()));
    }
    let mut mass = vec![0.0; w];
    let mut weighted = vec![0.0; w];
    for (row, &i) in posteriors.chunks(w).zip(interest) {
        let i = i.as_f64();
        if !i.is_finite() {
            return Err(Error::NonFinite(format!("interest value {i}")));
        }
        for z in 0..w {
            let q = row[z].as_f64();
            mass[z] += q;
            weighted[z] += q * i;
        }
    }
    let defined: Vec<Option<f64>> =
        (0..w).map(|z| (mass[z] >= DEGENERATE_MASS).then(|| weighted[z] / mass[z])).collect();
    let floor = defined.iter().flatten().copied().reduce(f64::min).unwrap_or(0.0);
    Ok(defined.into_iter().map(|a| a.unwrap_or(floor)).collect())
}

/// Builds the interest-biased skill prior from `s` sampled observations.
pub fn interest_biased_prior<S, F, C, O>(field: &F, source: &mut O, classifier: &C, eta: f64, s: usize) -> Result<SkillPrior>
where
    S: Scalar,
    F: InterestField<S> + ?Sized,
    C: SkillPosterior<S> + ?Sized,
    O: ObservationSource<S> + ?Sized,
{
    if s == 0 {
        return Err(Error::Config("num_samples_for_poi_calc must be at least 1".into()));
    }
    let x = source.sample_observations(s)?;
    let interest = field.interest_batch(&x, s)?;
    let q = classifier.posterior_batch(&x, s)?;
    let a = skill_interest_averages(&interest, &q, classifier.num_skills())?;
    SkillPrior::from_averages(&a, eta)
}

/// Samples an episode's skill from the interest-biased prior; returns the skill and the prior.
pub fn biased_skill_sample<S, F, C, O, R>(
    field: &F,
    source: &mut O,
    classifier: &C,
    eta: f64,
    s: usize,
    rng: &mut R,
) -> Result<(usize, SkillPrior)>
where
    S: Scalar,
    F: InterestField<S> + ?Sized,
    C: SkillPosterior<S> + ?Sized,
    O: ObservationSource<S> + ?Sized,
    R: Rng,
{
    let prior = interest_biased_prior(field, source, classifier, eta, s)?;
    Ok((prior.sample(rng), prior))
}

/// `scale * f(obs)`, the interest-as-reward bonus for one observation.
pub fn interest_intrinsic_reward<S: Scalar, F: InterestField<S> + ?Sized>(field: &F, obs: &[S], scale: f64) -> Result<S> {
    Ok(S::lit(scale) * field.interest(obs)?)
}
