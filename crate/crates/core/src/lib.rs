//! Optimal realizable PAC learners and the exact machinery behind their analysis.
//!
//! * [`learners`]: plain ERM, bagging and Hanneke's recursive sub-sampling learner.
//! * [`exact`]: the all-bootstraps voter `g_S`, distinct-count pmfs, and a
//!   statistical check of the margin-to-loss transfer for bagging.
//! * [`buckets`]: the recursive bucket construction and its representative
//!   pair, verified exactly at tiny scale and by counting at larger scale.
//! * [`estimation`]: Monte Carlo losses, margin histograms, slope fits and the
//!   classic realizable generalization bound.
//! * [`experiment`] and [`verify`]: the sweep runner and invariant suites used
//!   by the `paclab` command-line tool.

pub mod buckets;
pub mod concepts;
pub mod datagen;
pub mod error;
pub mod estimation;
pub mod exact;
pub mod experiment;
pub mod fixtures;
pub mod learners;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    Classifier, FiniteDistribution, Hypothesis, HypothesisKind, Label, LabeledExample, MarginThreshold, Point,
    TrainingSet, VotingClassifier,
};
pub use parallel::Execution;
