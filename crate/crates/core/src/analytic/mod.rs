//! Closed-form side of the model: cluster-length and head-gap laws, the
//! expected sleep time and the expected power saved, plus the no-relay
//! baseline.

mod cluster;
mod distribution;
mod energy;
mod gap;
mod params;

pub use cluster::{
    cluster_len_pdf, expected_cluster_length, renewal_decay_rate, trunc_exp_mean, ClusterLengthLaw, RenewalDensity,
    SeriesValue, CANCELLATION_LIMIT,
};
pub use distribution::{ChGapDistribution, TAIL_MASS};
pub use energy::{
    baseline_power_saved, cycle_power_saved, energy_figures, expected_ch_gap, expected_power_saved,
    expected_sleep_time, speed_pdf, EnergyFigures, NO_SLEEP_THRESHOLD,
};
pub use gap::{
    ch_gap_pdf, ch_gap_pdf_closed_form, ch_gap_pdf_first_branch, ch_gap_pdf_quadrature, intercluster_gap_pdf,
    ClosedFormValue, ClosedFormVariant, CLOSED_FORM_REL_TOL,
};
pub use params::{Fidelity, ModelParams, Speed, DEGENERATE_SPEED_SPREAD, MAX_RHO_R0};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid parameter {field}: {constraint}")]
    InvalidParams {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("no sleep opportunity: P{{X > D}} = {prob_sleep:e}")]
    NoSleepOpportunity { prob_sleep: f64 },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
