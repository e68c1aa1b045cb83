//! Hypergeometric function of matrix argument `0F1(n/2; D^2/4)` for
//! `p <= 2`: the normalizing constant of the matrix Langevin law.
//!
//! Everything is computed on the log scale. The scalar function goes
//! through a power series for small arguments and otherwise through a
//! Debye-anchored contiguous-relation ladder, which is overflow-free for
//! arguments far beyond `1e4`.

mod debye;
mod matrix;
mod oracle;
mod scalar;

pub use matrix::{
    hyp0f1_partials1, hyp0f1_partials2, log_hyp0f1_matrix2, log_norm_const, norm_const_partials,
    Hyp0F1Eval, MAX_TERMS,
};
pub use oracle::{mc_hyp0f1_oracle, MonteCarloEstimate};
pub use scalar::{log_hyp0f1, log_hyp0f1_series};

/// Default relative tolerance for series truncation.
pub const DEFAULT_TOL: f64 = 1e-12;
