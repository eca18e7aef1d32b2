//! Cluster-length law.
//!
//! Intra-cluster spacings are exponential gaps truncated to `(0, r0]`. Let
//! `u` be the renewal density of the unnormalised truncated gaps
//! `g(y) = ρ e^{-ρy}` on `(0, r0]`. Then `u = ρ` on `(0, r0]` and for
//! `y > r0` it solves the delay equation `u'(y) = -c u(y - r0)` with
//! `c = ρ e^{-ρ r0}` and a downward jump of `c` at `r0`. The conditional
//! cluster-length density (two or more vehicles) is `u / (e^{ρ r0} - 1)`.
//!
//! On each panel `[k r0, (k+1) r0]` the density is a degree-`k` polynomial.
//! The series form sums those polynomials directly and cancels badly once
//! `ρ x0` is large, so the recurrence is also tabulated on Chebyshev panels
//! until the density settles onto its slowest exponential mode.

use crate::numerics::{compensated_sum, ChebyshevPanel, NumericsError, CHEB_NODES};

use super::{AnalyticError, ModelParams};

/// Cancellation index above which the series value is not trusted.
pub const CANCELLATION_LIMIT: f64 = 1e6;

const MODE_TOL: f64 = 1e-13;
const NEGLIGIBLE_MASS: f64 = 1e-17;
const MAX_KERNEL_PANELS: usize = 5000;

/// `ln(e^y - 1)` without overflow.
pub(crate) fn ln_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// Mean of an exponential(ρ) variable truncated to `(0, r0]`.
pub fn trunc_exp_mean(rho: f64, r0: f64) -> f64 {
    let x = rho * r0;
    if x < 1e-3 {
        r0 * (0.5 - x / 12.0 + x * x * x / 720.0)
    } else {
        1.0 / rho - r0 / x.exp_m1()
    }
}

/// Expected cluster length `E[x0]` under the given fidelity.
pub fn expected_cluster_length(params: &ModelParams) -> f64 {
    let mu = trunc_exp_mean(params.rho, params.r0);
    match params.fidelity {
        super::Fidelity::Paper => mu * params.rho_r0().exp(),
        super::Fidelity::Corrected => mu * params.rho_r0().exp_m1(),
    }
}

/// Decay rate `s` of the renewal density, in 1/m.
///
/// `y = s r0` is the root of `y e^{-y} = ρ r0 e^{-ρ r0}` other than
/// `y = ρ r0`.
pub fn renewal_decay_rate(rho: f64, r0: f64) -> f64 {
    decay_root(rho * r0) / r0
}

fn decay_root(x: f64) -> f64 {
    let eps = x - 1.0;
    if eps.abs() < 1e-3 {
        // mirror root about the double root at 1
        return 1.0 - eps + eps * eps * (2.0 / 3.0) - eps.powi(3) * (4.0 / 9.0) + eps.powi(4) * (44.0 / 135.0)
            - eps.powi(5) * (104.0 / 405.0);
    }
    let ln_kappa = x.ln() - x;
    if x > 1.0 {
        let kappa = ln_kappa.exp();
        if kappa < 1e-6 {
            // y = -W(-κ) expanded in κ
            return kappa * (1.0 + kappa * (1.0 + 1.5 * kappa));
        }
        // root below 1, solved in l = ln y; increasing in l
        let f = |l: f64| (l - l.exp() - ln_kappa, 1.0 - l.exp());
        safeguarded_newton(f, ln_kappa, 0.0, ln_kappa + kappa, true).exp()
    } else {
        // root above 1; decreasing in y
        let big_l = -ln_kappa;
        let f = |y: f64| (y.ln() - y - ln_kappa, 1.0 / y - 1.0);
        safeguarded_newton(f, 1.0, 2.0 * big_l + 2.0, big_l + big_l.ln(), false)
    }
}

/// Newton iteration kept inside a bracket of a monotone function.
fn safeguarded_newton<F>(f: F, mut lo: f64, mut hi: f64, guess: f64, increasing: bool) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == increasing {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / dfx;
        let mut next = x - step;
        if !(next > lo && next < hi) || !step.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}

/// A series evaluation with its conditioning diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub cancellation_index: f64,
    /// False when the cancellation index exceeds [`CANCELLATION_LIMIT`]
    /// or a term overflowed.
    pub trusted: bool,
}

/// Conditional cluster-length density (two or more vehicles) from the
/// finite alternating series.
pub fn cluster_len_pdf(x0: f64, params: &ModelParams) -> Result<SeriesValue, AnalyticError> {
    if !(x0 >= 0.0) {
        return Err(AnalyticError::Domain(format!("cluster length must be >= 0, got {x0}")));
    }
    let (rho, r0) = (params.rho, params.r0);
    if x0 == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            cancellation_index: 1.0,
            trusted: true,
        });
    }
    let top = (x0 / r0).floor() as usize;
    let mut terms = Vec::with_capacity(2 * top + 1);
    terms.push(1.0);
    let mut ln_fact_prev = 0.0; // ln (m-1)!
    for m in 1..=top {
        let mf = m as f64;
        let ln_fact = ln_fact_prev + mf.ln();
        let t = rho * (x0 - mf * r0);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let shift = -rho * mf * r0;
        // (-1)^m [t^m/m! + t^{m-1}/(m-1)!] e^{-ρ m r0}
        let lt = t.max(0.0).ln();
        let a = if t > 0.0 {
            (mf * lt - ln_fact + shift).exp()
        } else {
            0.0
        };
        let b = if m == 1 {
            shift.exp()
        } else if t > 0.0 {
            ((mf - 1.0) * lt - ln_fact_prev + shift).exp()
        } else {
            0.0
        };
        terms.push(sign * a);
        terms.push(sign * b);
        ln_fact_prev = ln_fact;
    }
    let s = compensated_sum(terms.iter().copied());
    let scale = rho / params.rho_r0().exp_m1();
    let value = scale * s.sum;
    let finite = value.is_finite() && terms.iter().all(|t| t.is_finite());
    Ok(SeriesValue {
        value,
        cancellation_index: s.cancellation_index,
        trusted: finite && s.cancellation_index <= CANCELLATION_LIMIT,
    })
}

/// Tabulated renewal density `u` (unnormalised, mass `e^{ρ r0} - 1`).
#[derive(Debug, Clone)]
pub struct RenewalDensity {
    rho: f64,
    r0: f64,
    decay: f64,
    panels: Vec<ChebyshevPanel>,
    /// `u(y) = tail_amp e^{-decay (y - tail_start)}` for `y >= tail_start`.
    tail_start: f64,
    tail_amp: f64,
}

impl RenewalDensity {
    pub fn new(rho: f64, r0: f64) -> Result<Self, AnalyticError> {
        let c = rho * (-rho * r0).exp();
        let decay = renewal_decay_rate(rho, r0);
        let q = (-decay * r0).exp();
        let mut panels = vec![ChebyshevPanel {
            lo: 0.0,
            width: r0,
            values: [rho; CHEB_NODES],
        }];
        let mut mass = rho * r0;
        loop {
            let k = panels.len();
            if k > MAX_KERNEL_PANELS {
                return Err(AnalyticError::Numerics(NumericsError::Domain(format!(
                    "cluster-length kernel did not settle within {MAX_KERNEL_PANELS} panels (rho*r0 = {})",
                    rho * r0
                ))));
            }
            let prev = &panels[k - 1];
            let cum = prev.cumulative_integral();
            let start = prev.values[CHEB_NODES - 1] - if k == 1 { c } else { 0.0 };
            let mut values = [0.0; CHEB_NODES];
            for (v, ci) in values.iter_mut().zip(cum.iter()) {
                *v = start - c * ci;
            }
            let panel = ChebyshevPanel {
                lo: k as f64 * r0,
                width: r0,
                values,
            };
            mass += panel.integral();
            let settled = k >= 2 && {
                let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let err = values
                    .iter()
                    .zip(prev.values.iter())
                    .fold(0.0f64, |m, (v, p)| m.max((v - q * p).abs()));
                err <= MODE_TOL * scale
            };
            let end_value = values[CHEB_NODES - 1];
            let negligible = end_value.abs() / decay <= NEGLIGIBLE_MASS * mass;
            panels.push(panel);
            if settled || negligible {
                let tail_start = panels.len() as f64 * r0;
                return Ok(Self {
                    rho,
                    r0,
                    decay,
                    panels,
                    tail_start,
                    tail_amp: end_value,
                });
            }
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Asymptotic decay rate, 1/m.
    pub fn decay_rate(&self) -> f64 {
        self.decay
    }

    pub fn panels(&self) -> &[ChebyshevPanel] {
        &self.panels
    }

    pub fn tail_start(&self) -> f64 {
        self.tail_start
    }

    pub fn tail_amplitude(&self) -> f64 {
        self.tail_amp
    }

    /// Total mass, `e^{ρ r0} - 1`.
    pub fn mass(&self) -> f64 {
        (self.rho * self.r0).exp_m1()
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.tail_start {
            return self.tail_amp * (-self.decay * (y - self.tail_start)).exp();
        }
        let k = ((y / self.r0).ceil() as usize)
            .saturating_sub(1)
            .min(self.panels.len() - 1);
        self.panels[k].eval(y)
    }
}

/// Cluster-length law of one fidelity: an optional atom at zero plus a
/// continuous part proportional to `u`.
#[derive(Debug, Clone)]
pub struct ClusterLengthLaw {
    kernel: RenewalDensity,
    atom: f64,
    weight: f64,
}

impl ClusterLengthLaw {
    pub fn new(params: &ModelParams) -> Result<Self, AnalyticError> {
        params.validate()?;
        let kernel = RenewalDensity::new(params.rho, params.r0)?;
        let p = params.singleton_prob();
        let (atom, weight) = match params.fidelity {
            super::Fidelity::Paper => (0.0, (-ln_expm1(params.rho_r0())).exp()),
            super::Fidelity::Corrected => (p, p),
        };
        Ok(Self { kernel, atom, weight })
    }

    pub fn kernel(&self) -> &RenewalDensity {
        &self.kernel
    }

    /// Probability mass at zero length.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Factor multiplying `u` in the continuous part.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Density of the continuous part (excludes the atom).
    pub fn pdf(&self, x0: f64) -> f64 {
        self.weight * self.kernel.eval(x0)
    }

    /// Conditional density given two or more vehicles, fidelity-independent.
    pub fn conditional_pdf(&self, x0: f64) -> f64 {
        self.kernel.eval(x0) / self.kernel.mass()
    }
}
