//! Proximal policy optimization with generalized advantage estimation.

pub mod agent;
pub mod config;
pub mod gae;
pub mod rollout;

pub use agent::{argmax, clipped_surrogate, policy_row, PolicyRow, sample_categorical, ActOutput, ActorCritic, PpoStats};
pub use config::PpoConfig;
pub use gae::{compute_gae, normalize};
pub use rollout::{RolloutBatch, StepRecord};

#[cfg(test)]
mod tests;
