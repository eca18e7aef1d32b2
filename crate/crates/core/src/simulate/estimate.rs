use serde::{Deserialize, Serialize};

use crate::analytic::ModelParams;
use crate::numerics::{NeumaierSum, RunningStats};

use super::{CycleSample, SimulateError};

/// Fewest cycles accepted by [`estimate_energy`].
pub const MIN_CYCLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl From<&RunningStats> for Estimate {
    fn from(s: &RunningStats) -> Self {
        Estimate {
            value: s.mean(),
            std_error: s.std_error(),
        }
    }
}

/// Monte Carlo counterpart of the analytic energy figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub n_cycles: u64,
    pub expected_gap: Estimate,
    pub prob_sleep: Estimate,
    /// Over sleeping cycles only; `None` when no cycle slept.
    pub expected_sleep_time: Option<Estimate>,
    /// Plain per-cycle mean of `p_save`.
    pub expected_power_saved: Estimate,
    /// Per-cycle mean of `max(p_save, 0)`.
    pub expected_power_saved_clamped: Estimate,
    /// `Σ t_off / Σ (t_off + t_on)`.
    pub sleep_time_fraction: f64,
    /// `Σ e_off / Σ (t_off + t_on)`, W.
    pub time_average_power_saved: f64,
}

/// Streaming accumulator behind [`estimate_energy`].
#[derive(Debug, Clone, Default)]
pub struct CycleAccumulator {
    gap: RunningStats,
    sleeps: RunningStats,
    t_off: RunningStats,
    p_save: RunningStats,
    p_clamped: RunningStats,
    sum_off: NeumaierSum,
    sum_time: NeumaierSum,
    sum_energy: NeumaierSum,
}

impl CycleAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: &CycleSample) {
        self.gap.push(s.x);
        let slept = s.t_off > 0.0;
        self.sleeps.push(if slept { 1.0 } else { 0.0 });
        if slept {
            self.t_off.push(s.t_off);
        }
        self.p_save.push(s.p_save);
        self.p_clamped.push(s.p_save.max(0.0));
        self.sum_off.add(s.t_off);
        self.sum_time.add(s.t_off + s.t_on);
        self.sum_energy.add(s.e_off);
    }

    pub fn count(&self) -> u64 {
        self.gap.count()
    }

    pub fn finish(&self) -> Result<EnergyEstimate, SimulateError> {
        let n = self.count() as usize;
        if n < MIN_CYCLES {
            return Err(SimulateError::TooFewSamples {
                n,
                required: MIN_CYCLES,
            });
        }
        let total = self.sum_time.total();
        Ok(EnergyEstimate {
            n_cycles: self.count(),
            expected_gap: (&self.gap).into(),
            prob_sleep: (&self.sleeps).into(),
            expected_sleep_time: (self.t_off.count() > 0).then(|| (&self.t_off).into()),
            expected_power_saved: (&self.p_save).into(),
            expected_power_saved_clamped: (&self.p_clamped).into(),
            sleep_time_fraction: self.sum_off.total() / total,
            time_average_power_saved: self.sum_energy.total() / total,
        })
    }
}

/// Summarises renewal cycles. `params` is used only for validation.
pub fn estimate_energy(samples: &[CycleSample], params: &ModelParams) -> Result<EnergyEstimate, SimulateError> {
    params.validate()?;
    let mut acc = CycleAccumulator::new();
    for s in samples {
        acc.push(s);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::Fidelity;
    use crate::simulate::{sample_cycles, RngSpec};

    #[test]
    fn no_sleep_when_all_short() {
        let p = ModelParams::canonical(0.01).unwrap();
        let samples: Vec<CycleSample> = (0..2000)
            .map(|i| CycleSample::new(300.0 + (i % 400) as f64, 20.0, &p))
            .collect();
        let e = estimate_energy(&samples, &p).unwrap();
        assert_eq!(e.expected_power_saved.value, 0.0);
        assert_eq!(e.prob_sleep.value, 0.0);
        assert!(e.expected_sleep_time.is_none());
    }

    #[test]
    fn too_few_samples() {
        let p = ModelParams::canonical(0.01).unwrap();
        let samples = vec![CycleSample::new(900.0, 20.0, &p); 10];
        assert!(matches!(
            estimate_energy(&samples, &p),
            Err(SimulateError::TooFewSamples { n: 10, .. })
        ));
    }

    #[test]
    fn standard_error_scales_with_root_n() {
        let p = ModelParams::canonical(0.01).unwrap();
        let a = sample_cycles(&p, 200_000, &RngSpec::new(5, 0), Fidelity::Corrected);
        let b = sample_cycles(&p, 400_000, &RngSpec::new(5, 1), Fidelity::Corrected);
        let ea = estimate_energy(&a, &p).unwrap();
        let eb = estimate_energy(&b, &p).unwrap();
        let ratio = ea.expected_power_saved.std_error / eb.expected_power_saved.std_error;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
    }
}
