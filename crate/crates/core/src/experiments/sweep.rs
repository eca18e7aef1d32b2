use rayon::prelude::*;

use crate::analytic::{
    baseline_power_saved, expected_cluster_length, AnalyticError, ChGapDistribution, EnergyFigures, ModelParams,
};

use super::{Metric, SweepGrid, SweepTable, TableMeta, TableRow};

/// Status token for a failed evaluation.
pub(crate) fn status_of(err: &AnalyticError) -> &'static str {
    match err {
        AnalyticError::NoSleepOpportunity { .. } => "no_sleep",
        AnalyticError::InvalidParams { .. } => "invalid_params",
        AnalyticError::Domain(_) | AnalyticError::Numerics(_) => "numeric_failure",
    }
}

/// `E[X]` from the closed-form cluster mean.
pub fn expected_gap_closed_form(params: &ModelParams) -> f64 {
    expected_cluster_length(params) + params.r0 + 1.0 / params.rho
}

/// Analytic values of the requested metrics at one parameter point.
pub fn evaluate_cell(params: &ModelParams, metrics: &[Metric]) -> Vec<Result<f64, AnalyticError>> {
    if let Err(e) = params.validate() {
        return metrics.iter().map(|_| Err(e.clone())).collect();
    }
    let dist = if metrics.iter().any(|m| m.needs_distribution()) {
        Some(ChGapDistribution::new(params))
    } else {
        None
    };
    let figures: Option<Result<EnergyFigures, AnalyticError>> = dist.as_ref().map(|d| match d {
        Ok(d) => d.energy_figures(),
        Err(e) => Err(e.clone()),
    });
    metrics
        .iter()
        .map(|&m| {
            let fig = || figures.clone().expect("distribution built for this metric");
            match m {
                Metric::ExpectedGap => Ok(expected_gap_closed_form(params)),
                Metric::BaselinePowerSaved => baseline_power_saved(params),
                Metric::ProbSleep => fig().map(|f| f.prob_sleep),
                Metric::ExpectedPowerSaved => fig().map(|f| f.expected_power_saved),
                Metric::ExpectedSleepTime => fig().and_then(|f| {
                    f.expected_sleep_time.ok_or(AnalyticError::NoSleepOpportunity {
                        prob_sleep: f.prob_sleep,
                    })
                }),
                Metric::ExpectedPowerSavedClamped => match dist.as_ref().expect("distribution built") {
                    Ok(d) => d.expected_power_saved_clamped(),
                    Err(e) => Err(e.clone()),
                },
            }
        })
        .collect()
}

fn cell_rows(params: &ModelParams, metrics: &[Metric]) -> Vec<TableRow> {
    evaluate_cell(params, metrics)
        .into_iter()
        .zip(metrics)
        .map(|(res, m)| {
            let mut row = TableRow::new(params, m.name());
            match res {
                Ok(v) if v.is_finite() => {
                    row.value = Some(v);
                    row.status = "ok".into();
                }
                Ok(v) => {
                    row.status = "numeric_failure".into();
                    row.detail = Some(format!("non-finite value {v}"));
                }
                Err(e) => {
                    row.status = status_of(&e).into();
                    row.detail = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Evaluates every cell in parallel. Rows come out in grid order, metrics
/// in request order within a cell; failures are recorded per row.
pub fn run_sweep(grid: &SweepGrid) -> SweepTable {
    let rows: Vec<Vec<TableRow>> = grid.points().par_iter().map(|p| cell_rows(p, &grid.metrics)).collect();
    let mut meta = TableMeta::new("sweep", "custom");
    meta.params.push(grid.fixed);
    SweepTable {
        meta,
        rows: rows.into_iter().flatten().collect(),
    }
}

/// Runs several grids into one table under a common label.
pub fn run_sweeps(grids: &[SweepGrid], label: &str, workers: Option<usize>) -> SweepTable {
    with_workers(workers, || {
        let mut table = SweepTable {
            meta: TableMeta::new("sweep", label),
            rows: Vec::new(),
        };
        for g in grids {
            table.extend(run_sweep(g));
        }
        table
    })
}
