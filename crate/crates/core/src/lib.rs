//! Time-series classification through recurrence-plot images.
//!
//! A univariate series is delay-embedded into phase space, its pairwise state
//! distances form a recurrence matrix, and the matrix is rendered as a
//! gray-level image that a small two-stage CNN classifies. 1-NN Euclidean and
//! DTW classifiers provide the usual baselines.
//!
//! * [`ucr`] reads and writes UCR-archive text files.
//! * [`rp`] builds recurrence plots and images.
//! * [`cnn`] is the network, its layers and optimizers.
//! * [`train`] runs training, model selection, evaluation and ranking.
//! * [`baseline`] holds the nearest-neighbour classifiers.

pub mod baseline;
pub mod cnn;
pub mod error;
pub mod rp;
pub mod train;
pub mod ucr;

pub use error::{Error, Result};
