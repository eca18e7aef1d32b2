use serde::{Deserialize, Serialize};

use crate::numerics::{exp_integral_e1, integrate_adaptive, QuadratureSpec};

use super::{AnalyticError, ChGapDistribution, ModelParams};

/// Below this sleep probability `E[T_off]` is reported as unavailable.
pub const NO_SLEEP_THRESHOLD: f64 = 1e-12;

/// Uniform speed density on the open interval `(a, b)`.
pub fn speed_pdf(v: f64, params: &ModelParams) -> f64 {
    if v > params.a && v < params.b {
        1.0 / (params.b - params.a)
    } else {
        0.0
    }
}

/// Power saved over one renewal cycle of length `x` travelled at speed `v`.
///
/// Negative when the sleep is too short to pay back the switching energy.
pub fn cycle_power_saved(x: f64, v: f64, params: &ModelParams) -> Result<f64, AnalyticError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(AnalyticError::Domain(format!("speed must be > 0, got {v}")));
    }
    if x > params.d {
        let t_off = (x - params.d) / v;
        Ok((t_off * params.p0 - params.ec) / (x / v))
    } else {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFigures {
    /// `E[X]`, m.
    pub expected_gap: f64,
    /// `P{X > D}`.
    pub prob_sleep: f64,
    /// Mean sleep duration given that a sleep occurs, s. `None` when
    /// `prob_sleep` is below [`NO_SLEEP_THRESHOLD`].
    pub expected_sleep_time: Option<f64>,
    /// Per-cycle average power saved, W.
    pub expected_power_saved: f64,
    /// `E[V]`, m/s.
    pub mean_speed: f64,
    /// `∫_D^∞ f(x)/x dx`, 1/m.
    pub mean_inv_gap: f64,
}

impl ChGapDistribution {
    pub fn energy_figures(&self) -> Result<EnergyFigures, AnalyticError> {
        let p = *self.params();
        let prob_sleep = self.survival(p.d);
        let mean_inv_gap = self.integrate_upper(p.d, |x| 1.0 / x)?;
        let expected_sleep_time = if prob_sleep < NO_SLEEP_THRESHOLD {
            None
        } else {
            let excess = self.integrate_upper(p.d, |x| x - p.d)?;
            Some(p.mean_inv_speed() * excess / prob_sleep)
        };
        let expected_power_saved = p.p0 * prob_sleep - (p.p0 * p.d + p.ec * p.mean_speed()) * mean_inv_gap;
        Ok(EnergyFigures {
            expected_gap: self.mean()?,
            prob_sleep,
            expected_sleep_time,
            expected_power_saved,
            mean_speed: p.mean_speed(),
            mean_inv_gap,
        })
    }

    /// `E[max(P_save, 0)]`: the saving when uneconomic sleeps are skipped.
    pub fn expected_power_saved_clamped(&self) -> Result<f64, AnalyticError> {
        let p = *self.params();
        let inner = |v: f64| -> Result<f64, AnalyticError> {
            let lo = p.d + p.ec * v / p.p0;
            let s = self.survival(lo);
            let i = self.integrate_upper(lo, |x| 1.0 / x)?;
            Ok(p.p0 * s - (p.p0 * p.d + p.ec * v) * i)
        };
        if p.ec == 0.0 {
            return inner(p.a);
        }
        let failure = std::cell::Cell::new(None);
        let spec = QuadratureSpec {
            abs_tol: 1e-12 * p.p0,
            rel_tol: 1e-9,
            max_subdivisions: 30,
            tail_mass_tol: 1e-9,
        };
        let w = p.b - p.a;
        let value = integrate_adaptive(
            |v| match inner(v) {
                Ok(x) => x,
                Err(e) => {
                    let prev = failure.take();
                    failure.set(prev.or(Some(e)));
                    0.0
                }
            },
            p.a,
            p.b,
            &spec,
        )? / w;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

pub fn energy_figures(params: &ModelParams) -> Result<EnergyFigures, AnalyticError> {
    ChGapDistribution::new(params)?.energy_figures()
}

/// `E[X]`, m.
pub fn expected_ch_gap(params: &ModelParams) -> Result<f64, AnalyticError> {
    ChGapDistribution::new(params)?.mean()
}

/// `E[T_off]` given a sleep occurs, s.
pub fn expected_sleep_time(params: &ModelParams) -> Result<f64, AnalyticError> {
    let f = energy_figures(params)?;
    f.expected_sleep_time.ok_or(AnalyticError::NoSleepOpportunity {
        prob_sleep: f.prob_sleep,
    })
}

/// `E[P_save]`, W.
pub fn expected_power_saved(params: &ModelParams) -> Result<f64, AnalyticError> {
    Ok(energy_figures(params)?.expected_power_saved)
}

/// Expected power saved when every vehicle is its own cluster head
/// (`X ~ Exp(ρ)`), W.
pub fn baseline_power_saved(params: &ModelParams) -> Result<f64, AnalyticError> {
    params.validate()?;
    let z = params.rho * params.d;
    let e1 = exp_integral_e1(z)?;
    Ok(params.p0 * (-z).exp() - (params.p0 * params.d + params.ec * params.mean_speed()) * params.rho * e1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{Fidelity, Speed};

    #[test]
    fn speed_pdf_is_open_uniform() {
        let p = ModelParams::canonical(0.01).unwrap();
        let w = p.b - p.a;
        assert!((speed_pdf(15.0, &p) - 1.0 / w).abs() < 1e-15);
        assert!((1.0 / w - 1.0 / 11.11).abs() < 1e-3);
        assert_eq!(speed_pdf(p.a, &p), 0.0);
        assert_eq!(speed_pdf(p.b, &p), 0.0);
    }

    #[test]
    fn cycle_power_saved_hand_values() {
        let p = ModelParams::canonical(0.01).unwrap();
        assert_eq!(cycle_power_saved(800.0, 16.67, &p).unwrap(), 0.0);
        let v = 16.67;
        let hand = ((800.0 / v) * 1000.0 - 10.0) / (1600.0 / v);
        let got = cycle_power_saved(1600.0, v, &p).unwrap();
        assert!((got - hand).abs() < 1e-12);
        assert!((got - 499.9).abs() < 0.01);
        assert!(cycle_power_saved(1600.0, 0.0, &p).is_err());
        let free = ModelParams { ec: 0.0, ..p };
        for &v in &[5.0, 20.0, 31.0] {
            let s = cycle_power_saved(1200.0, v, &free).unwrap();
            assert!((s - 1000.0 * (1.0 - 800.0 / 1200.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn short_sleep_can_lose_energy() {
        let p = ModelParams::canonical(0.01).unwrap();
        assert!(cycle_power_saved(800.1, 20.0, &p).unwrap() < 0.0);
    }

    #[test]
    fn baseline_vanishes_for_large_rho_d() {
        let p = ModelParams::canonical(0.05).unwrap();
        let b = baseline_power_saved(&p).unwrap();
        assert!(b.abs() < 1e-10);
    }

    #[test]
    fn figures_satisfy_bounds() {
        for fid in [Fidelity::Paper, Fidelity::Corrected] {
            let p = ModelParams::canonical(0.01).unwrap().with_fidelity(fid);
            let f = energy_figures(&p).unwrap();
            assert!(f.prob_sleep > 0.0 && f.prob_sleep <= 1.0);
            assert!(f.expected_sleep_time.unwrap() >= 0.0);
            assert!(f.expected_power_saved <= p.p0 * f.prob_sleep);
        }
    }

    #[test]
    fn clamped_is_at_least_plain() {
        let p = ModelParams::canonical(0.01).unwrap();
        let d = ChGapDistribution::new(&p).unwrap();
        let plain = d.energy_figures().unwrap().expected_power_saved;
        let clamped = d.expected_power_saved_clamped().unwrap();
        assert!(clamped >= plain - 1e-9);
        let free = ModelParams { ec: 0.0, ..p };
        let d = ChGapDistribution::new(&free).unwrap();
        let a = d.energy_figures().unwrap().expected_power_saved;
        assert!((d.expected_power_saved_clamped().unwrap() - a).abs() < 1e-9);
    }

    #[test]
    fn degenerate_speed_sleep_time() {
        let p = ModelParams::canonical(0.01)
            .unwrap()
            .with_degenerate_speed(Speed::kmh(60.0))
            .unwrap();
        let d = ChGapDistribution::new(&p).unwrap();
        let f = d.energy_figures().unwrap();
        let excess = d.integrate_upper(p.d, |x| x - p.d).unwrap() / f.prob_sleep;
        let v = Speed::kmh(60.0).as_mps();
        assert!((f.expected_sleep_time.unwrap() - excess / v).abs() < 1e-6 * excess / v);
    }
}
