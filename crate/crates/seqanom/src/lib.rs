//! Monte Carlo harness, configuration files, CSV reports and the `seqanom`
//! command line for the `seqanom-core` library.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod report;

pub use config::{parse_config, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use harness::{
    binomial_upper_bound, calibrate, calibrate_shared, estimate, run_trials, single_source, summarize, sweep_alpha,
    Calibration, EstimateReport, Policy, RunSettings,
};
