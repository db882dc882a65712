//! Configuration schema, experiment runner and CSV/JSON exporters behind the
//! `jsdm` binary.

// `!(x > 0.0)` is how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod export;
pub mod runner;

pub use config::{load_config, parse_config, table1_scaled, ConfigError, ExperimentConfig, TABLE1_CFG};
pub use runner::{run, RunError, RunOptions, RunReport};
