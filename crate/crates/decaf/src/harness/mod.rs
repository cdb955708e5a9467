//! Experiment orchestration: metrics, dataset persistence, configuration,
//! and the end-to-end runner.

mod config;
mod dataset;
mod metrics;
mod runner;

pub use config::{DatasetSpec, ExperimentConfig, Method, ShiftConfig, SplitConfig};
pub use dataset::{
    dataset_fingerprint, load_dataset, save_dataset, save_dataset_with_provenance, DatasetMeta,
};
pub use metrics::{accuracy, binary_f1, macro_f1, micro_f1};
pub use runner::{aggregate, run_experiment, Aggregate, MetricsReport, SplitScores};
