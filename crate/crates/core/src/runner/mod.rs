//! Configuration, scenario construction, the experiment loop and artifacts.

mod config;
mod experiment;
mod persist;

pub use config::{ExperimentConfig, Scenario, DATA_DIR_ENV, KEYS};
pub use experiment::{
    build_experiment, build_experiment_from, run_experiment, run_experiment_with, Experiment, RoundOutcome,
    RunSummary, CHECKPOINT_FILE, MANIFEST_FILE, METRICS_FILE,
};
pub use persist::{
    checkpoint_from_bytes, checkpoint_to_bytes, export_pgm, load_checkpoint, load_discriminator, metrics_row,
    pgm_bytes, roc_csv, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, METRICS_HEADER,
};
