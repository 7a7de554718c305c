//! Interest-driven exploration on a gridworld with a mid-run task change.

pub mod diayn;
pub mod env;
pub mod error;
pub mod experiment;
pub mod external_model;
pub mod interest;
pub mod metrics;
pub mod nn;
pub mod poi;
pub mod ppo;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Net = nn::FeedforwardNet<f64>;
pub type Policy = ppo::ActorCritic<f64>;
pub type Model = external_model::ExternalModel<f64>;
pub type Classifier = diayn::SkillClassifier<f64>;
pub type Vae = sampler::ObservationVae<f64>;
pub type Embedding = poi::PoiEmbedding<f64>;
pub type ExperimentRun = experiment::Run<f64>;
