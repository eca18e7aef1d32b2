use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ChGapDistribution, EnergyFigures, Fidelity, ModelParams};
use crate::simulate::{CycleAccumulator, CycleSampler, EnergyEstimate, Estimate, RngSpec};

use super::sweep::{expected_gap_closed_form, status_of, with_workers};
use super::{ExperimentsError, Metric, SweepGrid, SweepTable, TableMeta, TableRow};

/// Fewest cycles per cell accepted by [`run_validation`].
pub const MIN_VALIDATION_CYCLES: usize = 10_000;

/// Metrics compared between the analytic and sampling engines.
pub const VALIDATED_METRICS: [Metric; 3] = [
    Metric::ExpectedGap,
    Metric::ExpectedSleepTime,
    Metric::ExpectedPowerSaved,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub n_cycles: usize,
    pub seed: u64,
    /// Analytic fidelities to check.
    pub fidelities: Vec<Fidelity>,
    /// Pair each analytic fidelity with the other sampler (negative control).
    pub mismatched: bool,
    pub z_threshold: f64,
    /// Relative accuracy of the analytic values, combined with the Monte
    /// Carlo standard error in the z-score.
    pub analytic_rel_tol: f64,
    pub workers: Option<usize>,
}

/// Default for [`ValidationOptions::analytic_rel_tol`].
pub const ANALYTIC_REL_TOL: f64 = 1e-9;

impl ValidationOptions {
    pub fn new(n_cycles: usize, seed: u64) -> Self {
        ValidationOptions {
            n_cycles,
            seed,
            fidelities: vec![Fidelity::Corrected],
            mismatched: false,
            z_threshold: 3.0,
            analytic_rel_tol: ANALYTIC_REL_TOL,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    /// Cell parameters; `fidelity` is the analytic one.
    pub params: ModelParams,
    pub sampler_fidelity: Fidelity,
    pub metric: Metric,
    pub analytic: Option<f64>,
    pub estimate: Option<Estimate>,
    pub z: Option<f64>,
    pub pass: bool,
    /// `(paper - corrected) / corrected` of the analytic value.
    pub fidelity_gap: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_cycles: u64,
    pub seed: u64,
    pub mismatched: bool,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Flattens into the common table: per row, `<metric>` holds the
    /// analytic value and `<metric>_mc`, `<metric>_z` and
    /// `<metric>_fidelity_gap` follow.
    pub fn to_table(&self, templates: &[ModelParams]) -> SweepTable {
        let label = if self.mismatched { "mismatched" } else { "matched" };
        let mut meta = TableMeta::new("validation", label);
        meta.seed = Some(self.seed);
        meta.n_cycles = Some(self.n_cycles);
        meta.passed = Some(self.passed());
        meta.params = templates.to_vec();
        let mut rows = Vec::with_capacity(4 * self.rows.len());
        for r in &self.rows {
            let status = r.status.clone();
            let name = r.metric.name();
            let make = |suffix: &str, value: Option<f64>, stderr: Option<f64>| {
                let mut row = TableRow::new(&r.params, format!("{name}{suffix}"));
                row.value = value;
                row.stderr = stderr;
                row.status = status.clone();
                if r.sampler_fidelity != r.params.fidelity {
                    row.detail = Some(format!("sampler fidelity {}", r.sampler_fidelity));
                }
                row
            };
            rows.push(make("", r.analytic, None));
            rows.push(make(
                "_mc",
                r.estimate.map(|e| e.value),
                r.estimate.map(|e| e.std_error),
            ));
            rows.push(make("_z", r.z, None));
            rows.push(make("_fidelity_gap", r.fidelity_gap, None));
        }
        SweepTable { meta, rows }
    }
}

/// Difference over the combined uncertainty of both engines.
fn z_score(analytic: f64, est: Estimate, rel_tol: f64) -> f64 {
    let diff = est.value - analytic;
    let u = est.std_error.hypot(rel_tol * analytic);
    if u > 0.0 {
        diff / u
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

fn fidelity_index(f: Fidelity) -> u64 {
    match f {
        Fidelity::Paper => 0,
        Fidelity::Corrected => 1,
    }
}

/// Monte Carlo estimate over `n` cycles of one cell.
pub fn simulate_cell(params: &ModelParams, n: usize, rng: &RngSpec, fidelity: Fidelity) -> EnergyEstimate {
    let sampler = CycleSampler::new(params, fidelity);
    let mut r = rng.rng();
    let mut acc = CycleAccumulator::new();
    for _ in 0..n {
        acc.push(&sampler.sample(&mut r));
    }
    acc.finish().expect("cycle count checked by caller")
}

struct CellAnalytic {
    figures: Result<EnergyFigures, crate::analytic::AnalyticError>,
    gap: f64,
}

fn analytic_cell(params: &ModelParams) -> CellAnalytic {
    CellAnalytic {
        figures: ChGapDistribution::new(params).and_then(|d| d.energy_figures()),
        gap: expected_gap_closed_form(params),
    }
}

fn analytic_value(cell: &CellAnalytic, metric: Metric) -> Result<f64, String> {
    if metric == Metric::ExpectedGap {
        return Ok(cell.gap);
    }
    let f = cell.figures.as_ref().map_err(|e| status_of(e).to_string())?;
    match metric {
        Metric::ExpectedSleepTime => f.expected_sleep_time.ok_or_else(|| "no_sleep".to_string()),
        Metric::ExpectedPowerSaved => Ok(f.expected_power_saved),
        _ => unreachable!("only validated metrics are compared"),
    }
}

fn estimate_of(est: &EnergyEstimate, metric: Metric) -> Option<Estimate> {
    match metric {
        Metric::ExpectedGap => Some(est.expected_gap),
        Metric::ExpectedSleepTime => est.expected_sleep_time,
        Metric::ExpectedPowerSaved => Some(est.expected_power_saved),
        _ => None,
    }
}

/// Compares analytic figures with Monte Carlo over every grid cell.
///
/// Cell `i` with sampler fidelity `f` uses stream `2 i + f`, so the result
/// does not depend on scheduling.
pub fn run_validation(grid: &SweepGrid, options: &ValidationOptions) -> Result<ValidationReport, ExperimentsError> {
    grid.validate()?;
    if options.n_cycles < MIN_VALIDATION_CYCLES {
        return Err(ExperimentsError::TooFewCycles {
            n: options.n_cycles,
            required: MIN_VALIDATION_CYCLES,
        });
    }
    if options.fidelities.is_empty() {
        return Err(ExperimentsError::InvalidGrid("no fidelities requested".into()));
    }
    let cells = grid.points();
    let tasks: Vec<(usize, Fidelity)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, _)| options.fidelities.iter().map(move |&f| (i, f)))
        .collect();

    let rows = with_workers(options.workers, || {
        tasks
            .par_iter()
            .map(|&(i, analytic_fid)| {
                let base = cells[i];
                let sampler_fid = if options.mismatched {
                    analytic_fid.other()
                } else {
                    analytic_fid
                };
                let params = base.with_fidelity(analytic_fid);
                let paper = analytic_cell(&base.with_fidelity(Fidelity::Paper));
                let corrected = analytic_cell(&base.with_fidelity(Fidelity::Corrected));
                let own = match analytic_fid {
                    Fidelity::Paper => &paper,
                    Fidelity::Corrected => &corrected,
                };
                let rng = RngSpec::new(options.seed, 2 * i as u64 + fidelity_index(sampler_fid));
                let est = simulate_cell(&params.with_fidelity(sampler_fid), options.n_cycles, &rng, sampler_fid);
                VALIDATED_METRICS
                    .iter()
                    .map(|&metric| {
                        let analytic = analytic_value(own, metric);
                        let estimate = estimate_of(&est, metric);
                        let fidelity_gap = match (analytic_value(&paper, metric), analytic_value(&corrected, metric)) {
                            (Ok(p), Ok(c)) if c != 0.0 => Some((p - c) / c),
                            _ => None,
                        };
                        let (z, pass, status) = match (&analytic, estimate) {
                            (Ok(a), Some(e)) => {
                                let z = z_score(*a, e, options.analytic_rel_tol);
                                let pass = z.abs() <= options.z_threshold;
                                (Some(z), pass, if pass { "pass" } else { "fail" }.to_string())
                            }
                            // Both engines agree that nobody sleeps.
                            (Err(s), None) if s == "no_sleep" => (None, true, "no_sleep".to_string()),
                            (Err(s), _) => (None, false, s.clone()),
                            (Ok(_), None) => (None, false, "no_sleep_mc".to_string()),
                        };
                        ValidationRow {
                            params,
                            sampler_fidelity: sampler_fid,
                            metric,
                            analytic: analytic.ok(),
                            estimate,
                            z,
                            pass,
                            fidelity_gap,
                            status,
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });

    Ok(ValidationReport {
        n_cycles: options.n_cycles as u64,
        seed: options.seed,
        mismatched: options.mismatched,
        rows: rows.into_iter().flatten().collect(),
    })
}

/// The 3 x 3 grid over ρ in {0.005, 0.02, 0.08} and r0 in {100, 200, 400}.
pub fn default_validation_grid(fidelity: Fidelity) -> SweepGrid {
    SweepGrid::new(
        vec![0.005, 0.02, 0.08],
        vec![100.0, 200.0, 400.0],
        ModelParams::canonical(0.01)
            .expect("canonical parameters are valid")
            .with_fidelity(fidelity),
        VALIDATED_METRICS.to_vec(),
    )
    .expect("default grid is valid")
}
