//! Generative engines: spatial snapshots with cluster extraction, the
//! renewal-cycle sampler and a one-BS timeline.

mod cycle;
mod estimate;
mod rng;
mod snapshot;
mod timeline;

pub use cycle::{sample_cycle, sample_cycles, CycleSample, CycleSampler, EXACT_SUM_LIMIT};
pub use estimate::{estimate_energy, CycleAccumulator, EnergyEstimate, Estimate, MIN_CYCLES};
pub use rng::RngSpec;
pub use snapshot::{
    extract_clusters, min_window_length, sample_snapshot, sample_snapshot_with, Cluster, ClusterSet, Snapshot,
    MIN_WINDOW_FACTOR,
};
pub use timeline::{required_timeline_window, run_timeline, run_timeline_on, SpeedMode, TimelineReport, MAX_EVENTS};

use thiserror::Error;

use crate::analytic::AnalyticError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("window of {window_length} m is too small; need at least {required} m")]
    WindowTooSmall { window_length: f64, required: f64 },
    #[error("{n} cycles is too few; need at least {required}")]
    TooFewSamples { n: usize, required: usize },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}
