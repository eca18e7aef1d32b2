// NaN inputs must fail range checks, hence `!(x > 0.0)` style guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod experiments;
pub mod numerics;
pub mod simulate;
