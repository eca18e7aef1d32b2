//! Renewal-cycle sampler: one head gap and one speed per cycle.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analytic::{trunc_exp_mean, Fidelity, ModelParams};

use super::snapshot::uniform_open;
use super::RngSpec;

/// Above this many truncated gaps the cluster length is drawn from its
/// normal approximation.
pub const EXACT_SUM_LIMIT: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    /// Head gap, m.
    pub x: f64,
    /// Speed, m/s.
    pub v: f64,
    /// Sleep time, s.
    pub t_off: f64,
    /// Active time, s.
    pub t_on: f64,
    /// Power saved over the cycle, W.
    pub p_save: f64,
    /// Energy saved over the cycle, J.
    pub e_off: f64,
}

impl CycleSample {
    pub fn new(x: f64, v: f64, params: &ModelParams) -> Self {
        let t_off = ((x - params.d) / v).max(0.0);
        let t_on = x.min(params.d) / v;
        let e_off = if x > params.d {
            t_off * params.p0 - params.ec
        } else {
            0.0
        };
        let p_save = if x > params.d { e_off / (x / v) } else { 0.0 };
        Self {
            x,
            v,
            t_off,
            t_on,
            p_save,
            e_off,
        }
    }
}

/// Variance of an exponential(ρ) variable truncated to `(0, r0]`.
fn trunc_exp_variance(rho: f64, r0: f64) -> f64 {
    let x = rho * r0;
    if x < 1e-2 {
        r0 * r0 * (1.0 / 12.0 - x * x / 720.0)
    } else {
        let e = x.exp_m1();
        1.0 / (rho * rho) - r0 * r0 * (1.0 + e) / (e * e)
    }
}

/// Precomputed constants for drawing cycles of one parameter set.
#[derive(Debug, Clone)]
pub struct CycleSampler {
    params: ModelParams,
    fidelity: Fidelity,
    /// `-expm1(-ρ r0)`.
    trunc_mass: f64,
    /// `ln(1 - e^{-ρ r0})`.
    ln_continue: f64,
    mean: f64,
    sd: f64,
}

impl CycleSampler {
    pub fn new(params: &ModelParams, fidelity: Fidelity) -> Self {
        let x = params.rho_r0();
        Self {
            params: *params,
            fidelity,
            trunc_mass: -(-x).exp_m1(),
            ln_continue: (-(-x).exp()).ln_1p(),
            mean: trunc_exp_mean(params.rho, params.r0),
            sd: trunc_exp_variance(params.rho, params.r0).max(0.0).sqrt(),
        }
    }

    /// Number of truncated gaps in a cluster.
    fn gap_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        let k = (u.ln() / self.ln_continue).floor();
        let k = if k.is_finite() && k < 9.0e18 {
            k as u64
        } else {
            u64::MAX / 2
        };
        match self.fidelity {
            Fidelity::Corrected => k,
            Fidelity::Paper => k + 1,
        }
    }

    fn trunc_exp<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        let r0 = self.params.r0;
        (-(-u * self.trunc_mass).ln_1p() / self.params.rho).min(r0)
    }

    pub fn cluster_length<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.gap_count(rng);
        if k <= EXACT_SUM_LIMIT {
            (0..k).map(|_| self.trunc_exp(rng)).sum()
        } else {
            let kf = k as f64;
            let normal = Normal::new(kf * self.mean, kf.sqrt() * self.sd).expect("finite normal parameters");
            normal.sample(rng).clamp(0.0, kf * self.params.r0)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CycleSample {
        let x0 = self.cluster_length(rng);
        let u = 1.0 - rng.random::<f64>();
        let x1 = self.params.r0 - u.ln() / self.params.rho;
        let v = uniform_open(rng, self.params.a, self.params.b);
        CycleSample::new(x0 + x1, v, &self.params)
    }
}

pub fn sample_cycle<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R, fidelity: Fidelity) -> CycleSample {
    CycleSampler::new(params, fidelity).sample(rng)
}

pub fn sample_cycles(params: &ModelParams, n: usize, rng: &RngSpec, fidelity: Fidelity) -> Vec<CycleSample> {
    let sampler = CycleSampler::new(params, fidelity);
    let mut r = rng.rng();
    (0..n).map(|_| sampler.sample(&mut r)).collect()
}
