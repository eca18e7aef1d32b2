//! Time-domain simulation of one base station.
//!
//! The BS covers `[W - r0 - D, W - r0]` of a window of length `W`, so every
//! vehicle that can decide the head status of a covered vehicle is inside
//! the window. A vehicle is a cluster head when nothing lies within `r0`
//! ahead of it; the BS is active iff a head is in coverage.
//!
//! All instants at which that predicate can flip are enumerated up front:
//! coverage entries and exits, leaving the decision zone
//! `[W - r0 - D, W]`, and in heterogeneous mode the times at which two
//! vehicles sharing the zone are exactly `0` or `r0` apart. Between two
//! consecutive instants the state is constant, so it is evaluated once at
//! the midpoint from scratch.

use serde::{Deserialize, Serialize};

use crate::analytic::ModelParams;
use crate::numerics::{NeumaierSum, RunningStats};

use super::{sample_snapshot, RngSpec, SimulateError, Snapshot};

pub const MAX_EVENTS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpeedMode {
    /// Every vehicle moves at this speed (m/s); clusters are rigid.
    Common(f64),
    /// Each vehicle keeps its own sampled speed.
    Heterogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    /// Simulated time, s. Shorter than requested when `complete` is false.
    pub sim_duration: f64,
    pub sleep_fraction: f64,
    pub n_transitions: u64,
    /// `sleep_time P0 - (n_transitions / 2) Ec`, J.
    pub energy_saved: f64,
    /// `energy_saved / sim_duration`, W.
    pub mean_power_saved: f64,
    pub sleep_time: f64,
    pub active_time: f64,
    /// Complete renewal cycles, each from one head leaving coverage to the next.
    pub n_cycles: u64,
    /// Mean over complete cycles of the per-cycle saving, W.
    pub cycle_mean_power_saved: f64,
    pub cycle_power_saved_se: f64,
    /// BS state during the first and the last simulated interval.
    pub start_active: bool,
    pub end_active: bool,
    pub n_vehicles: usize,
    pub n_events: u64,
    pub complete: bool,
    /// Time up to which events were processed, s.
    pub processed_until: f64,
}

/// Window needed so that every vehicle reaching coverage within `duration`
/// starts inside it.
pub fn required_timeline_window(params: &ModelParams, duration: f64, mode: SpeedMode) -> f64 {
    let vmax = match mode {
        SpeedMode::Common(v) => v,
        SpeedMode::Heterogeneous => params.b,
    };
    params.d + params.r0 + vmax * duration
}

pub fn run_timeline(
    params: &ModelParams,
    duration: f64,
    window_length: f64,
    mode: SpeedMode,
    rng: &RngSpec,
) -> Result<TimelineReport, SimulateError> {
    check_inputs(params, duration, window_length, mode)?;
    let snapshot = sample_snapshot(params, window_length, rng)?;
    run_timeline_on(params, &snapshot, duration, mode)
}

fn check_inputs(params: &ModelParams, duration: f64, window_length: f64, mode: SpeedMode) -> Result<(), SimulateError> {
    params.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SimulateError::Domain(format!("duration must be > 0, got {duration}")));
    }
    if let SpeedMode::Common(v) = mode {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SimulateError::Domain(format!("common speed must be > 0, got {v}")));
        }
    }
    let required = required_timeline_window(params, duration, mode);
    if !(window_length >= required) {
        return Err(SimulateError::WindowTooSmall {
            window_length,
            required,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Vehicle {
    x: f64,
    v: f64,
    t_in: f64,
    t_cov_out: f64,
    t_out: f64,
}

impl Vehicle {
    fn at(&self, t: f64) -> f64 {
        self.x + self.v * t
    }
}

struct Geometry {
    cov_lo: f64,
    cov_hi: f64,
    r0: f64,
}

impl Geometry {
    /// Whether any head is in coverage; `pos` is scratch space.
    fn active(&self, vehicles: &[Vehicle], ids: &[usize], t: f64, pos: &mut Vec<f64>) -> bool {
        pos.clear();
        pos.extend(ids.iter().map(|&i| vehicles[i].at(t)));
        pos.sort_by(f64::total_cmp);
        for (k, &p) in pos.iter().enumerate() {
            if p < self.cov_lo || p > self.cov_hi {
                continue;
            }
            match pos.get(k + 1) {
                Some(&next) if next - p <= self.r0 => {}
                _ => return true,
            }
        }
        false
    }

    /// Whether vehicle `who`, at the coverage exit at time `t`, is a head.
    fn is_head(&self, vehicles: &[Vehicle], ids: &[usize], who: usize, t: f64) -> bool {
        let p = self.cov_hi;
        !ids.iter().any(|&j| {
            if j == who {
                return false;
            }
            let q = vehicles[j].at(t);
            q > p && q - p <= self.r0
        })
    }
}

/// Runs the timeline on a given snapshot. In common mode the snapshot's
/// speeds are ignored.
pub fn run_timeline_on(
    params: &ModelParams,
    snapshot: &Snapshot,
    duration: f64,
    mode: SpeedMode,
) -> Result<TimelineReport, SimulateError> {
    let w = snapshot.window_length;
    check_inputs(params, duration, w, mode)?;
    let geo = Geometry {
        cov_hi: w - params.r0,
        cov_lo: w - params.r0 - params.d,
        r0: params.r0,
    };
    let zone_hi = w;

    let mut vehicles = Vec::new();
    for (i, &x) in snapshot.positions.iter().enumerate() {
        let v = match mode {
            SpeedMode::Common(v) => v,
            SpeedMode::Heterogeneous => snapshot.speeds[i],
        };
        if x >= zone_hi || x + v * duration < geo.cov_lo {
            continue;
        }
        vehicles.push(Vehicle {
            x,
            v,
            t_in: ((geo.cov_lo - x) / v).max(0.0),
            t_cov_out: (geo.cov_hi - x) / v,
            t_out: (zone_hi - x) / v,
        });
    }

    let mut times: Vec<f64> = Vec::with_capacity(3 * vehicles.len() + 2);
    let in_run = |t: f64| t > 0.0 && t < duration;
    for veh in &vehicles {
        for t in [veh.t_in, veh.t_cov_out, veh.t_out] {
            if in_run(t) {
                times.push(t);
            }
        }
    }
    let mut by_in: Vec<usize> = (0..vehicles.len()).collect();
    by_in.sort_by(|&i, &j| vehicles[i].t_in.total_cmp(&vehicles[j].t_in));
    if matches!(mode, SpeedMode::Heterogeneous) {
        let mut open: Vec<usize> = Vec::new();
        for &j in &by_in {
            let vj = vehicles[j];
            open.retain(|&i| vehicles[i].t_out > vj.t_in);
            for &i in &open {
                let vi = vehicles[i];
                let dv = vj.v - vi.v;
                if dv == 0.0 {
                    continue;
                }
                let lo = vi.t_in.max(vj.t_in);
                let hi = vi.t_out.min(vj.t_out);
                let dx = vj.x - vi.x;
                for target in [-params.r0, 0.0, params.r0] {
                    let t = (target - dx) / dv;
                    if t > lo && t < hi && in_run(t) {
                        times.push(t);
                    }
                }
            }
            if times.len() > 2 * MAX_EVENTS {
                break;
            }
            open.push(j);
        }
    }

    let mut end = duration;
    let mut complete = true;
    if times.len() > MAX_EVENTS {
        let (_, nth, _) = times.select_nth_unstable_by(MAX_EVENTS, f64::total_cmp);
        end = *nth;
        times.truncate(MAX_EVENTS);
        times.retain(|&t| t < end);
        complete = false;
    }
    times.push(0.0);
    times.push(end);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let n_events = (times.len() - 2) as u64;

    let mut exits: Vec<(f64, usize)> = vehicles
        .iter()
        .enumerate()
        .filter(|(_, v)| v.t_cov_out > 0.0 && v.t_cov_out < end)
        .map(|(i, v)| (v.t_cov_out, i))
        .collect();
    exits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut active_ids: Vec<usize> = Vec::new();
    let mut next_in = 0;
    let mut next_exit = 0;
    let mut pos = Vec::new();
    let mut sleep_time = NeumaierSum::new();
    let mut active_time = NeumaierSum::new();
    let mut n_transitions = 0u64;
    let mut prev_state: Option<bool> = None;
    let mut start_active = false;
    let mut cycle_start: Option<f64> = None;
    let mut cycle_sleep = 0.0;
    let mut cycle_sleeps = 0u32;
    let mut cycles = RunningStats::new();

    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        while next_exit < exits.len() && exits[next_exit].0 <= t0 {
            let (te, who) = exits[next_exit];
            next_exit += 1;
            if geo.is_head(&vehicles, &active_ids, who, te) {
                if let Some(start) = cycle_start {
                    let len = te - start;
                    if len > 0.0 {
                        cycles.push((cycle_sleep * params.p0 - f64::from(cycle_sleeps) * params.ec) / len);
                    }
                }
                cycle_start = Some(te);
                cycle_sleep = 0.0;
                cycle_sleeps = 0;
            }
        }
        let mid = 0.5 * (t0 + t1);
        while next_in < by_in.len() && vehicles[by_in[next_in]].t_in <= mid {
            active_ids.push(by_in[next_in]);
            next_in += 1;
        }
        active_ids.retain(|&i| vehicles[i].t_out > mid);
        let on = geo.active(&vehicles, &active_ids, mid, &mut pos);
        let dt = t1 - t0;
        if on {
            active_time.add(dt);
        } else {
            sleep_time.add(dt);
            cycle_sleep += dt;
        }
        if prev_state.is_none() {
            start_active = on;
        }
        if let Some(prev) = prev_state {
            if prev != on {
                n_transitions += 1;
                if !on {
                    cycle_sleeps += 1;
                }
            }
        }
        prev_state = Some(on);
    }

    let sleep = sleep_time.total();
    let energy_saved = sleep * params.p0 - 0.5 * n_transitions as f64 * params.ec;
    Ok(TimelineReport {
        sim_duration: end,
        sleep_fraction: (sleep / end).clamp(0.0, 1.0),
        n_transitions,
        energy_saved,
        mean_power_saved: energy_saved / end,
        sleep_time: sleep,
        active_time: active_time.total(),
        n_cycles: cycles.count(),
        cycle_mean_power_saved: if cycles.count() > 0 { cycles.mean() } else { f64::NAN },
        cycle_power_saved_se: if cycles.count() > 1 {
            cycles.std_error()
        } else {
            f64::NAN
        },
        start_active,
        end_active: prev_state.unwrap_or(false),
        n_vehicles: vehicles.len(),
        n_events,
        complete,
        processed_until: end,
    })
}
