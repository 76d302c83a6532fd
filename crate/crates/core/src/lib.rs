//! Detection of sparse positive correlations in a multivariate Gaussian
//! sample.
//!
//! The library provides the generative correlation models (block, clique,
//! perfect matching), four test statistics with analytic thresholds, an
//! exact likelihood-ratio oracle for tiny instances, a numeric evaluator
//! of the minimax lower bound, a reproducible Monte Carlo risk harness,
//! and random-geometric-graph clique experiments.

pub mod bayes;
pub mod detectors;
pub mod harness;
pub mod lower_bound;
pub mod model;
pub mod numeric;
pub mod rgg;
pub mod seed;

mod error;

pub use error::Error;
pub use model::{AnomalousSet, ClassKind, ModelSpec, SampleMatrix};

pub type Result<T> = std::result::Result<T, Error>;
