//! Relative prevalence estimation for underreported conditions from
//! positive-unlabeled data.
//!
//! The estimator fits `p(s=1|x,g) = σ(w·x + b) · σ(θ_g)` to observed labels,
//! then compares groups through the mean of the condition score
//! `σ(w·x + b)`. The score only needs to be proportional to `p(y=1|x)`, so
//! the relative prevalence is recoverable even when absolute prevalence is
//! not.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checks;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod prevalence;
pub mod rng;
pub mod semisynth;
pub mod stats;
pub mod synth;
pub mod train;

pub use dataset::{FeatureMatrix, GroupId, LabeledDataset, SplitSpec};
pub use error::{PurpleError, Result};
pub use model::PurpleModel;
pub use prevalence::{relative_prevalence, relative_prevalence_vs_complement, RelativePrevalenceEstimate};
pub use train::{fit, FitResult, TrainConfig};
