//! Batch runner for hard-core thinned Boolean model experiments: configure,
//! simulate, evaluate analytics, compare, and write data files.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, Grid, KernelChoice, LawConfig};
pub use run::{run_analytic, run_compare, run_fit_tail, run_simulate, ComparisonReport};
