//! Multi-prototype self-learning for classifiers trained on noisy labels.
//!
//! Training alternates two phases. A classifier is first trained on the
//! observed labels. Then, every epoch, a handful of prototypes is elected per
//! class from the current feature space by density peaks, every training
//! sample is relabelled by its average cosine similarity to each class's
//! prototypes, and the classifier is trained on a weighted sum of the losses
//! against the observed and the corrected labels.
//!
//! | module | contents |
//! |---|---|
//! | [`dataset`] | synthetic data, label noise, sampling, `SMPD`/CSV files |
//! | [`similarity`] | cosine and negative-Euclidean similarity matrices |
//! | [`prototypes`] | density ρ, separation η, prototype selectors |
//! | [`correction`] | prototype voting and correction metrics |
//! | [`model`] | softmax classifiers, gradients, momentum SGD |
//! | [`selftrain`] | the iterative training loop and checkpoints |
//! | [`evalreport`] | ablation sweeps and report tables |
//! | [`benchmark`] | the pinned synthetic benchmark |
//!
//! Data-parallel loops run on rayon when the `parallel` feature is on (the
//! default). Results are bit-identical to the serial path; see [`Exec`].

pub mod benchmark;
pub mod correction;
pub mod dataset;
pub mod error;
pub mod evalreport;
pub mod exec;
pub mod model;
pub mod prototypes;
pub mod selftrain;
pub mod similarity;

pub use error::{Error, Result};
pub use exec::Exec;
