//! Trainable Gaussian-mixture Bayes classifiers over fixed embedding spaces.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical piece:
//! the mixture posterior layer with spherical, diagonal and full covariances,
//! its analytic cross-entropy gradients, Nesterov SGD with cosine annealing,
//! the learnable and PCA reductions, parameter-count analytics, and a seeded
//! synthetic generator with an exact Bayes oracle. File formats and the CLI
//! live in the `gmmc` crate.
#![no_std]

extern crate alloc;

pub mod analytics;
pub mod data;
mod error;
mod float;
pub mod gmm;
pub mod gradcheck;
pub mod reduction;
pub mod tensor_math;
pub mod training;

pub use data::{BayesOracle, EmbeddingDataset, SplitTag, SyntheticSpec};
pub use error::{Error, Result};
pub use gmm::{CovarianceFamily, GmmParams};
pub use reduction::{ReductionKind, ReductionMap};
pub use tensor_math::Matrix;
pub use training::{TrainConfig, TrainReport};
