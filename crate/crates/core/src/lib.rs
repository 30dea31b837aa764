//! Rare-event classification toolkit.
//!
//! The crate covers the whole workflow for a tiny, extremely imbalanced
//! tabular dataset:
//!
//! - [`psychometrics`]: Rasch / partial-credit measures built from raw survey items
//! - [`surrogate`]: a seeded stand-in dataset with a fixed class balance and feature shape
//! - [`cgan`]: conditional GAN augmentation for mixed continuous/binary features
//! - [`classifiers`]: logistic regression, SMO-trained SVM, random forest
//! - [`evalkit`]: confusion matrices and macro/micro/weighted metrics
//! - [`pipeline`]: stratified split, leave-one-out grid search, six-arm experiment
//! - [`distcheck`]: real-vs-synthetic distribution fidelity
//!
//! Everything is deterministic given a master seed; see [`numkit::Rng`].

pub mod cgan;
pub mod classifiers;
pub mod distcheck;
pub mod error;
pub mod evalkit;
pub mod numkit;
pub mod pipeline;
pub mod psychometrics;
pub mod surrogate;
pub mod table;

pub use error::{Error, Result};

pub use classifiers::TrainedClassifier;
pub use evalkit::{ClassificationReport, ConfusionMatrix};
pub use numkit::Rng;
pub use pipeline::{ExperimentResult, Hyperparams};
pub use table::{FeatureKind, FeatureSchema, LabeledTable};
