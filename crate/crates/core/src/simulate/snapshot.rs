use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytic::ModelParams;

use super::{RngSpec, SimulateError};

/// Window must be this many multiples of `max(1/ρ, r0)`.
pub const MIN_WINDOW_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub window_length: f64,
    /// Strictly increasing, within `[0, window_length]`.
    pub positions: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl Snapshot {
    pub fn empty(window_length: f64) -> Self {
        Self {
            window_length,
            positions: Vec::new(),
            speeds: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Spacings between consecutive vehicles.
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn min_window_length(params: &ModelParams) -> f64 {
    MIN_WINDOW_FACTOR * (1.0 / params.rho).max(params.r0)
}

pub fn sample_snapshot(params: &ModelParams, window_length: f64, rng: &RngSpec) -> Result<Snapshot, SimulateError> {
    sample_snapshot_with(params, window_length, &mut rng.rng())
}

pub fn sample_snapshot_with<R: Rng + ?Sized>(
    params: &ModelParams,
    window_length: f64,
    rng: &mut R,
) -> Result<Snapshot, SimulateError> {
    params.validate()?;
    let required = min_window_length(params);
    if !(window_length >= required) || !window_length.is_finite() {
        return Err(SimulateError::WindowTooSmall {
            window_length,
            required,
        });
    }
    let lambda = params.rho * window_length;
    let n = Poisson::new(lambda)
        .map_err(|e| SimulateError::Domain(format!("Poisson mean {lambda}: {e}")))?
        .sample(rng) as usize;
    let mut positions: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * window_length).collect();
    positions.sort_by(f64::total_cmp);
    for i in 1..positions.len() {
        if positions[i] <= positions[i - 1] {
            positions[i] = positions[i - 1].next_up();
        }
    }
    let speeds = (0..n).map(|_| uniform_open(rng, params.a, params.b)).collect();
    Ok(Snapshot {
        window_length,
        positions,
        speeds,
    })
}

/// Uniform on the open interval `(a, b)`.
pub(crate) fn uniform_open<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    loop {
        let v = a + (b - a) * rng.random::<f64>();
        if v > a && v < b {
            return v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Front-most member.
    pub head_position: f64,
    /// Rear-most member.
    pub tail_position: f64,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterSet {
    /// Ordered by position.
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Distances between adjacent heads, leaving out the two clusters that
    /// touch the window edges.
    pub fn head_gaps(&self) -> Vec<f64> {
        let n = self.clusters.len();
        if n < 4 {
            return Vec::new();
        }
        self.clusters[1..n - 1]
            .windows(2)
            .map(|w| w[1].head_position - w[0].head_position)
            .collect()
    }
}

/// Splits sorted positions wherever the spacing exceeds `r0`.
pub fn extract_clusters(snapshot: &Snapshot, r0: f64) -> ClusterSet {
    extract_clusters_from(&snapshot.positions, r0)
}

pub(crate) fn extract_clusters_from(positions: &[f64], r0: f64) -> ClusterSet {
    let mut clusters = Vec::new();
    let mut iter = positions.iter();
    let Some(&first) = iter.next() else {
        return ClusterSet::default();
    };
    let mut cur = Cluster {
        head_position: first,
        tail_position: first,
        member_count: 1,
    };
    for &x in iter {
        if x - cur.head_position > r0 {
            clusters.push(cur);
            cur = Cluster {
                head_position: x,
                tail_position: x,
                member_count: 1,
            };
        } else {
            cur.head_position = x;
            cur.member_count += 1;
        }
    }
    clusters.push(cur);
    ClusterSet { clusters }
}
