//! Turning interest into behaviour: the interest-biased skill prior, interest as intrinsic
//! reward, and a global interest embedding that conditions the policy.

mod embedding;
mod prior;

pub use embedding::{
    condition_policy_on_embedding, train_embedding_models, update_embedding, EmbeddingConfig, EmbeddingUpdate,
    PoiEmbedding,
};
pub use prior::{
    biased_skill_sample, interest_biased_prior, interest_intrinsic_reward, skill_interest_averages, SkillPrior,
    DEGENERATE_MASS,
};

#[cfg(test)]
mod tests;
