//! Localized complexity of finite classes.
//!
//! Every class handled here is the star-shaped hull of finitely many
//! generators, each a linear combination of the dictionary functions. The
//! supremum of a linear process `|Z_w|` over `star(G) ∩ rD` is attained by
//! scaling each generator `w` to `min(1, r/||w||) * w`, so no grid over the
//! scaling parameter is needed.
//!
//! Three processes are estimated by Monte Carlo: the Rademacher process
//! `N^{-1/2} sum eps_i w(X_i)`, the canonical Gaussian process with
//! covariance given by `L_2` inner products, and the multiplier process
//! `N^{-1/2} sum eps_i xi_i w(X_i)` with residuals `xi_i = u0(X_i) - Y_i`.
//! Their fixed points feed the optimistic rate, and [`event`] checks the
//! sample event under which the aggregation guarantee holds.

mod class;
pub mod event;
mod fixed_point;
mod process;
mod rate;

pub use class::{Generator, LocalizedClass};
pub use event::{check_event_a, BulletReport, EventConfig, EventReport};
pub use fixed_point::{fixed_point, FixedPointEstimate, FixedPointOptions, TraceStep};
pub use process::{
    gaussian_sup, multiplier_quantile, rademacher_sup, Estimate, ProcessDraws, ProcessKind, Sampling,
};
pub use rate::{r_opt, OptimisticRate, RateConstants, RateOptions};
