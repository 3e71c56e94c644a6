//! Tail shape estimation for marginal distributions built from many
//! conditionals, such as the distribution of test losses over random
//! training sets.
//!
//! The crate provides the Pickands and DEdH shape estimators, split
//! averaging, pooled peaks-over-threshold and cross-tail estimation
//! ([`cte::cte`]), the synthetic scenarios used to validate them, and a
//! small regression harness (Gaussian process, polynomial kernel ridge) for
//! studying the tails of model predictions under Monte Carlo cross
//! validation.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cte;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod models;
pub mod rng;
pub mod simulate;

pub use cte::{cte, ncte, pooled_pot, ConditionalSamples, CteResult, CteVerdict, TailVerdict};
pub use error::{Result, TailError};
pub use estimators::{
    dedh, pickands, sort_descending, split_average, EstimatorConfig, EstimatorKind, KRule,
    SortedBatch, TailEstimate,
};
pub use rng::{Purpose, RngStream};
