//! Numerical substrate: adaptive quadrature, compensated summation, the
//! exponential integral, an n-fold truncated-exponential convolution oracle
//! and small empirical-distribution helpers.
//!
//! Everything here is a pure function of its arguments.

mod chebyshev;
mod convolution;
mod empirical;
mod quadrature;
mod special;
mod summation;

pub use chebyshev::{ChebyshevPanel, CHEB_NODES};
pub use convolution::{trunc_exp_nfold_pdf, DensityTable, TruncExpConvolver, MIN_POINTS_PER_RANGE};
pub use empirical::{ks_critical_value, ks_statistic, Histogram, RunningStats};
pub use quadrature::{integrate_adaptive, integrate_piecewise, integrate_semi_infinite, QuadratureSpec};
pub use special::{exp_integral_e1, exp_scaled_e1, EULER_GAMMA};
pub use summation::{compensated_sum, CompensatedSum, NeumaierSum};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    /// Adaptive refinement ran out of budget before meeting the tolerance.
    #[error("quadrature failure: best estimate {estimate:e} with error estimate {error:e}")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid too coarse: {points_per_range} points per truncation range, need at least {required}")]
    GridTooCoarse { points_per_range: usize, required: usize },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
}

impl NumericsError {
    /// Best available estimate when the failure still produced one.
    pub fn best_estimate(&self) -> Option<f64> {
        match self {
            NumericsError::QuadratureFailure { estimate, .. } => Some(*estimate),
            _ => None,
        }
    }
}
