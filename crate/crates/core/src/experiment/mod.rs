//! Config parsing, the training loop, on-disk outputs, and their aggregation.

pub mod config;
pub mod output;
pub mod plot;
pub mod runner;
pub mod summary;

pub use config::{Algorithm, ExperimentConfig, MetricsConfig, PoiConfig, SamplerConfig};
pub use output::{run_experiment, run_id, RunFiles, RunOutcome, SUMMARY_FILE};
pub use plot::plot_dir;
pub use runner::{run_seed, Diagnostics, Ewma, RolloutRow, Run};
pub use summary::{load_runs, render_table, summarize, summarize_dir, RunData, SummaryRow};
