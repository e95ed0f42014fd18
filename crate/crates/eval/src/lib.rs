//! Experiment harness for blindmask: synthetic corpus, batch evaluation and
//! timing benchmark.

pub mod batch;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod error;

pub use batch::{run_batch, run_batch_on, write_report, EvalReport, Input, ReportRow};
pub use bench::{bench_methods, BenchConfig, BenchReport};
pub use config::{ExperimentConfig, ExperimentParams, Method, Metric};
pub use error::{EvalError, Result};
