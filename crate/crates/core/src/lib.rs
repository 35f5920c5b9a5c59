//! Energy-margin robustness metrics for planar manipulation.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod energy;
pub mod eval;
pub mod geometry;
pub mod metrics;
pub mod planner;
pub mod scenarios;
pub mod seed;
mod serde_inf;
