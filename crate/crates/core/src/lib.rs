//! CUSUM-based tests for relevant structural breaks.
//!
//! A change is relevant when the distance between the parameters before and
//! after the break exceeds a user-chosen threshold `Delta`. The crate provides
//! the CUSUM process and change-point estimator, long-run variance estimators,
//! the relevance tests for mean, covariance, regression slope and distribution
//! function, and a Monte Carlo harness for size and power studies.

// NaN-aware guards like `!(x > 0.0)` are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cusum;
pub mod error;
pub mod lrv;
pub mod normal;
pub mod relevance;
pub mod sample;
pub mod sim;

pub use cusum::{
    cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared,
    ChangePointEstimate, CusumProcess,
};
pub use error::{Error, Result};
pub use relevance::{LrvMode, RelevanceConfig, RelevanceReport, TestKind};
pub use sample::Sample;
