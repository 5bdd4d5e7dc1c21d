//! Exact finite-sample meta-analysis of 2x2 trials for the common odds ratio.
//!
//! The crate computes the repro-samples confidence interval for the common log
//! odds ratio of `K` independent binomial trials, keeping studies that observed
//! no events in either arm, along with Mantel-Haenszel and Peto baselines and
//! a coverage-simulation harness.

pub mod binomial;
pub mod error;
pub mod estimators;
pub mod io;
pub mod model;
pub mod repro;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use estimators::{EstimateCI, Method};
pub use model::{MetaDataset, OddsParams, ProbMap, SampleSizeRoster, StudyTable};
pub use repro::{McPool, NuclearEval, OptimizerConfig, ReproConfig, ReproResult};
pub use rng::RngStream;
