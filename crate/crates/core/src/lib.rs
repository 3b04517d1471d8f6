//! Two-stage aggregation for finite dictionaries under squared loss.
//!
//! The procedure splits a `2N` sample in half. On the first half it keeps
//! every dictionary member whose empirical excess risk over the empirical
//! minimizer is small relative to a median-of-means distance; on the second
//! half it runs empirical risk minimization over all midpoints of the kept
//! members. Supporting modules provide the median-of-means and truncation
//! statistics, Monte Carlo estimates of localized complexity fixed points,
//! a checker for the high-probability sample event the guarantee relies on,
//! and a seeded simulation harness comparing the procedure with plain ERM
//! and the empirical star algorithm.

pub mod bench;
pub mod cli;
pub mod complexity;
pub mod error;
pub mod io;
pub mod model;
pub mod mom;
pub mod procedure;
pub mod rng;
pub mod trunc;

pub use error::{Error, Result};
