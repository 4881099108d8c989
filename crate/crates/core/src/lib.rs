//! Learning classifiers over discrete feature vectors.
//!
//! Supervised: Naive Bayes, decomposable model selection and the Naive Mix.
//! Unsupervised: classification EM, Gibbs sampling, and Ward or McQuitty
//! agglomerative clustering. [`eval`] scores groupings against gold labels
//! through the best one-to-one mapping of groups onto classes.

pub mod cluster;
pub mod decomposable;
pub mod em;
pub mod error;
pub mod eval;
pub mod events;
pub mod gibbs;
pub mod naive_bayes;

pub use error::{Error, Result};
pub use events::{marginal_counts, FeatureSchema, Level, MarginalCounts, ObservationSet};
pub use naive_bayes::{ParameterSet, SufficientStats};
