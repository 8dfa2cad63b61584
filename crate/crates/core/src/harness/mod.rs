//! Experiment grids, CSV records and summaries behind the `rsr` binary.
//!
//! Every record carries the seed it was produced with:
//! `seed = mix64(mix64(master_seed, cell_index), trial_index)`, see
//! [`crate::rng`]. Re-running [`run_trial`] with the same spec and indices
//! reproduces the record.

mod config;
mod report;
mod run;
mod spec;

pub use config::{config_reference, parse_config, parse_config_str};
pub use report::{mean_std, read_records, report_summary, summarize, summary_path, write_summary, SummaryRow};
pub use run::{run_experiment, run_experiment_to, run_trial, trial_dataset, trial_seed, ExperimentRecord, COLUMNS};
pub use spec::{BaselineSettings, Cell, ExperimentSpec, Method, Preset};
