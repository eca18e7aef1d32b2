use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{Fidelity, ModelParams, Speed};

use super::ExperimentsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "E_X")]
    ExpectedGap,
    #[serde(rename = "E_Toff")]
    ExpectedSleepTime,
    #[serde(rename = "E_Psave")]
    ExpectedPowerSaved,
    #[serde(rename = "baseline_Psave")]
    BaselinePowerSaved,
    #[serde(rename = "prob_sleep")]
    ProbSleep,
    #[serde(rename = "E_Psave_clamped")]
    ExpectedPowerSavedClamped,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::ExpectedGap,
        Metric::ExpectedSleepTime,
        Metric::ExpectedPowerSaved,
        Metric::BaselinePowerSaved,
        Metric::ProbSleep,
        Metric::ExpectedPowerSavedClamped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ExpectedGap => "E_X",
            Metric::ExpectedSleepTime => "E_Toff",
            Metric::ExpectedPowerSaved => "E_Psave",
            Metric::BaselinePowerSaved => "baseline_Psave",
            Metric::ProbSleep => "prob_sleep",
            Metric::ExpectedPowerSavedClamped => "E_Psave_clamped",
        }
    }

    /// Whether evaluating the metric needs the full head-gap distribution.
    pub(crate) fn needs_distribution(self) -> bool {
        !matches!(self, Metric::ExpectedGap | Metric::BaselinePowerSaved)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
                format!("unknown metric `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Cartesian grid over ρ and r0 around a fixed parameter template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub rho_values: Vec<f64>,
    pub r0_values: Vec<f64>,
    pub fixed: ModelParams,
    pub metrics: Vec<Metric>,
}

impl SweepGrid {
    pub fn new(
        rho_values: Vec<f64>,
        r0_values: Vec<f64>,
        fixed: ModelParams,
        metrics: Vec<Metric>,
    ) -> Result<Self, ExperimentsError> {
        let grid = SweepGrid {
            rho_values,
            r0_values,
            fixed,
            metrics,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn single(params: ModelParams, metrics: Vec<Metric>) -> Result<Self, ExperimentsError> {
        Self::new(vec![params.rho], vec![params.r0], params, metrics)
    }

    pub fn validate(&self) -> Result<(), ExperimentsError> {
        if self.rho_values.is_empty() {
            return Err(ExperimentsError::InvalidGrid("rho_values is empty".into()));
        }
        if self.r0_values.is_empty() {
            return Err(ExperimentsError::InvalidGrid("r0_values is empty".into()));
        }
        if self.metrics.is_empty() {
            return Err(ExperimentsError::InvalidGrid("no metrics requested".into()));
        }
        for p in self.points() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rho_values.len() * self.r0_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order: ρ outer, r0 inner.
    pub fn points(&self) -> Vec<ModelParams> {
        let mut out = Vec::with_capacity(self.len());
        for &rho in &self.rho_values {
            for &r0 in &self.r0_values {
                out.push(ModelParams { rho, r0, ..self.fixed });
            }
        }
        out
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fixed.fidelity = fidelity;
        self
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced.
pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| match i {
                i if i == n - 1 => hi,
                i => lo + (hi - lo) * i as f64 / (n - 1) as f64,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    /// Grids making up the preset. Fig. 4 carries a second grid with a
    /// near point-mass speed law at 60 km/h for the speed-sensitivity view.
    pub fn grids(self, fidelity: Fidelity) -> Vec<SweepGrid> {
        let base = ModelParams::canonical(0.01)
            .expect("canonical parameters are valid")
            .with_fidelity(fidelity);
        let grid = |rho: Vec<f64>, r0: Vec<f64>, fixed: ModelParams, metrics: Vec<Metric>| {
            SweepGrid::new(rho, r0, fixed, metrics).expect("preset grids are valid")
        };
        match self {
            Preset::Fig2 => vec![grid(
                log_space(1e-3, 0.2, 41),
                vec![50.0, 100.0, 150.0, 200.0],
                base,
                vec![Metric::ExpectedGap],
            )],
            Preset::Fig3 => vec![grid(
                vec![0.005, 0.01, 0.02],
                lin_space(25.0, 400.0, 16),
                base,
                vec![Metric::ExpectedSleepTime, Metric::ProbSleep],
            )],
            Preset::Fig4 => {
                let rho = log_space(1e-3, 0.1, 31);
                let metrics = vec![
                    Metric::ExpectedPowerSaved,
                    Metric::ExpectedPowerSavedClamped,
                    Metric::ProbSleep,
                ];
                let point = base
                    .with_degenerate_speed(Speed::kmh(60.0))
                    .expect("60 km/h is a valid speed");
                vec![
                    grid(rho.clone(), vec![200.0], base, metrics.clone()),
                    grid(rho, vec![200.0], point, metrics),
                ]
            }
            Preset::Fig5 => vec![grid(
                lin_space(0.01, 0.1, 19),
                vec![200.0],
                base,
                vec![Metric::ExpectedPowerSaved, Metric::BaselinePowerSaved],
            )],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig2, fig3, fig4 or fig5)"))
    }
}
