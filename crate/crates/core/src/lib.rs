//! Univariate logistic feature ranking for two-class problems with many
//! more features than samples, plus adaptive choice of how many ranked
//! features to keep.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod logit;
pub mod metrics;
pub mod rng;
pub mod select;
pub mod simulate;

pub use data::{Diagnostic, FeatureScore, LabeledMatrix, Ranking, SelectionMethod, SelectionResult};
pub use error::{Error, Result};
