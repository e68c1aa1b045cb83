//! Clustering of directional data on the Stiefel manifold with finite
//! mixtures of matrix Langevin distributions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod em;
pub mod error;
pub mod ingest;
pub mod langevin;
pub mod metrics;
pub mod mixture;
pub mod model_select;
pub mod priors;
pub mod specfun;
pub mod stiefel;

pub use error::{Error, Result};
