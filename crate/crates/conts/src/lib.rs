//! File formats, configuration and the experiment driver around
//! [`conts_core`].

pub mod config;
pub mod dataset;
pub mod embfile;
pub mod error;
pub mod log;
pub mod runner;
pub mod stats;

pub use config::{DataSource, RunConfig};
pub use dataset::{load_dataset, Dataset, DatasetPaths, IdMap};
pub use error::{Error, Result};
pub use log::{compare_logs, recompute, summary_csv, ComparisonResult, PairedMetric, SessionRecord};
pub use runner::{prepare, run_experiment, run_prepared, worker_threads, write_outputs, RunOutput};
pub use stats::{paired_test, PairedTest};
