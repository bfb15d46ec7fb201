//! Experiment sweeps over the three-stage shadow tomography pipeline,
//! log-log scaling fits, and CSV/SVG export.

pub mod config;
pub mod error;
pub mod export;
pub mod fit;
pub mod records;
pub mod runner;
pub mod seeds;

pub use config::BenchConfig;
pub use error::{BenchError, Result};
pub use records::ExperimentRecord;
