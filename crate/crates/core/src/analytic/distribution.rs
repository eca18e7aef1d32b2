//! Evaluable law of the distance `X` between adjacent cluster heads.
//!
//! `X = x0 + x1` with `x1 = r0 + Exp(ρ)`, so with `z = x - r0`
//!
//! ```text
//! f_X(x) = ρ [ α e^{-ρ z} + β J(z) ],   J(z) = ∫_0^z e^{-ρ(z-y)} u(y) dy
//! ```
//!
//! where `α` is the zero-length atom of the cluster-length law and `β u`
//! its continuous part. `J` is tabulated on Chebyshev panels aligned with
//! the renewal-density panels (sub-divided so that `ρ h <= 2`). Past the
//! last renewal panel `u` is a single exponential and `J` has a closed
//! form, so the far tail is analytic however large `E[X]` is.

use crate::numerics::{integrate_adaptive, integrate_semi_infinite, ChebyshevPanel, QuadratureSpec, CHEB_NODES};

use super::cluster::ClusterLengthLaw;
use super::{AnalyticError, ModelParams};

/// Residual tail mass that defines `x_max`.
pub const TAIL_MASS: f64 = 1e-9;

fn exprel(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 + 0.5 * t
    } else {
        t.exp_m1() / t
    }
}

/// Analytic tail beyond `x_start`: `f = ρ [P e^{-ρw} + Q φ(w)]`,
/// `φ(w) = ∫_0^w e^{-ρ(w-t)} e^{-s t} dt`, `w = x - x_start`.
#[derive(Debug, Clone, Copy)]
struct GapTail {
    x_start: f64,
    rho: f64,
    s: f64,
    p: f64,
    q: f64,
}

impl GapTail {
    fn phi(&self, w: f64) -> f64 {
        let d = self.rho - self.s;
        if (d * w).abs() <= 1.0 {
            (-self.rho * w).exp() * w * exprel(d * w)
        } else {
            ((-self.s * w).exp() - (-self.rho * w).exp()) / d
        }
    }

    /// `∫_w^∞ φ`.
    fn psi(&self, w: f64) -> f64 {
        let d = self.rho - self.s;
        if (d * w).abs() <= 1.0 {
            (-self.rho * w).exp() * (w * exprel(d * w) / self.s + 1.0 / (self.s * self.rho))
        } else {
            ((-self.s * w).exp() / self.s - (-self.rho * w).exp() / self.rho) / d
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        let w = x - self.x_start;
        self.rho * (self.p * (-self.rho * w).exp() + self.q * self.phi(w))
    }

    /// Mass beyond `x >= x_start`.
    fn mass_beyond(&self, x: f64) -> f64 {
        let w = (x - self.x_start).max(0.0);
        self.p * (-self.rho * w).exp() + self.rho * self.q * self.psi(w)
    }

    fn slow_rate(&self) -> f64 {
        self.rho.min(self.s)
    }

    fn fast_rate(&self) -> f64 {
        self.rho.max(self.s)
    }
}

#[derive(Debug, Clone)]
pub struct ChGapDistribution {
    params: ModelParams,
    /// Equal-width panels starting at `r0`.
    panels: Vec<ChebyshevPanel>,
    width: f64,
    /// `prefix[i]` = mass of panels `0..i`.
    prefix: Vec<f64>,
    /// `suffix[i]` = mass of panels `i..`.
    suffix: Vec<f64>,
    tail: GapTail,
    x_max: f64,
}

fn tail_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_subdivisions: 60,
        tail_mass_tol: 1e-16,
    }
}

impl ChGapDistribution {
    pub fn new(params: &ModelParams) -> Result<Self, AnalyticError> {
        params.validate()?;
        let law = ClusterLengthLaw::new(params)?;
        let kernel = law.kernel();
        let (rho, r0) = (params.rho, params.r0);
        let (alpha, beta) = (law.atom(), law.weight());
        let n_sub = ((params.rho_r0() / 2.0).ceil() as usize).max(1);
        let h = r0 / n_sub as f64;

        let mut panels = Vec::with_capacity(kernel.panels().len() * n_sub);
        let mut j_at = 0.0;
        for (k, kp) in kernel.panels().iter().enumerate() {
            for sub in 0..n_sub {
                let za = k as f64 * r0 + sub as f64 * h;
                let g = ChebyshevPanel::from_fn(za, h, |y| (rho * (y - za)).exp() * kp.eval(y));
                let cum = g.cumulative_integral();
                let ys = ChebyshevPanel::nodes(za, h);
                let mut values = [0.0; CHEB_NODES];
                let mut j_end = j_at;
                for i in 0..CHEB_NODES {
                    let damp = (-rho * (ys[i] - za)).exp();
                    let j = damp * (j_at + cum[i]);
                    values[i] = rho * (alpha * (-rho * ys[i]).exp() + beta * j);
                    j_end = j;
                }
                j_at = j_end;
                panels.push(ChebyshevPanel {
                    lo: za + r0,
                    width: h,
                    values,
                });
            }
        }
        let y_tail = kernel.tail_start();
        let tail = GapTail {
            x_start: y_tail + r0,
            rho,
            s: kernel.decay_rate(),
            p: alpha * (-rho * y_tail).exp() + beta * j_at,
            q: beta * kernel.tail_amplitude(),
        };

        let masses: Vec<f64> = panels.iter().map(|p| p.integral()).collect();
        let mut prefix = vec![0.0; masses.len() + 1];
        for i in 0..masses.len() {
            prefix[i + 1] = prefix[i] + masses[i];
        }
        let mut suffix = vec![0.0; masses.len() + 1];
        for i in (0..masses.len()).rev() {
            suffix[i] = suffix[i + 1] + masses[i];
        }

        let x_max = Self::find_x_max(&tail);
        if !(x_max.is_finite() && prefix.iter().all(|m| m.is_finite())) {
            return Err(AnalyticError::Domain(format!(
                "gap distribution left double range for rho = {rho}, r0 = {r0}"
            )));
        }
        Ok(Self {
            params: *params,
            panels,
            width: h,
            prefix,
            suffix,
            tail,
            x_max,
        })
    }

    fn find_x_max(tail: &GapTail) -> f64 {
        if tail.mass_beyond(tail.x_start) <= TAIL_MASS {
            return tail.x_start;
        }
        let mut hi = 1.0 / tail.slow_rate();
        while tail.mass_beyond(tail.x_start + hi) > TAIL_MASS {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if tail.mass_beyond(tail.x_start + mid) > TAIL_MASS {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        tail.x_start + hi
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Truncation point: mass beyond it is at most [`TAIL_MASS`].
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Start of the analytic exponential tail.
    pub fn tail_start(&self) -> f64 {
        self.tail.x_start
    }

    /// Asymptotic exponential decay rate of the density, 1/m.
    pub fn tail_decay_rate(&self) -> f64 {
        self.tail.slow_rate()
    }

    fn r0(&self) -> f64 {
        self.params.r0
    }

    fn panel_index(&self, x: f64) -> usize {
        (((x - self.r0()) / self.width) as usize).min(self.panels.len() - 1)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > self.r0()) {
            return 0.0;
        }
        if x >= self.tail.x_start {
            return self.tail.pdf(x);
        }
        self.panels[self.panel_index(x)].eval(x).max(0.0)
    }

    /// Total mass of the constructed density; one up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.prefix[self.panels.len()] + self.tail.mass_beyond(self.tail.x_start)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > self.r0()) {
            return 0.0;
        }
        let v = if x >= self.tail.x_start {
            self.prefix[self.panels.len()] + self.tail.mass_beyond(self.tail.x_start) - self.tail.mass_beyond(x)
        } else {
            let i = self.panel_index(x);
            self.prefix[i] + self.panels[i].integral_to(x)
        };
        v.clamp(0.0, 1.0)
    }

    /// `P{X > x}`, accumulated from the upper end so small tails keep
    /// their relative accuracy.
    pub fn survival(&self, x: f64) -> f64 {
        if x >= self.tail.x_start {
            return self.tail.mass_beyond(x);
        }
        let x = x.max(self.r0());
        let i = self.panel_index(x);
        let p = &self.panels[i];
        let v = p.integral() - p.integral_to(x) + self.suffix[i + 1] + self.tail.mass_beyond(self.tail.x_start);
        v.clamp(0.0, 1.0)
    }

    /// `∫_from^∞ w(x) f(x) dx` for a weight smooth on `[r0, ∞)`.
    pub fn integrate_upper<W>(&self, from: f64, weight: W) -> Result<f64, AnalyticError>
    where
        W: Fn(f64) -> f64,
    {
        let start = from.max(self.r0());
        let mut total = 0.0;
        if start < self.tail.x_start {
            let i0 = self.panel_index(start);
            let first = self.panels[i0].map(|x, v| v * weight(x));
            total += first.integral() - first.integral_to(start);
            for p in &self.panels[i0 + 1..] {
                total += p.map(|x, v| v * weight(x)).integral();
            }
        }
        let t0 = start.max(self.tail.x_start);
        let spec = tail_spec();
        let f = |x: f64| weight(x) * self.tail.pdf(x);
        let near = 40.0 / self.tail.fast_rate();
        total += integrate_adaptive(f, t0, t0 + near, &spec)?;
        total += integrate_semi_infinite(f, t0 + near, 1.0 / self.tail.slow_rate(), &spec)?;
        Ok(total)
    }

    /// `E[X]`.
    pub fn mean(&self) -> Result<f64, AnalyticError> {
        self.integrate_upper(self.r0(), |x| x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ch_gap_pdf, expected_cluster_length, Fidelity};

    fn params(rho: f64, r0: f64, fid: Fidelity) -> ModelParams {
        ModelParams::canonical(rho)
            .unwrap()
            .with_r0(r0)
            .unwrap()
            .with_fidelity(fid)
    }

    #[test]
    fn pdf_matches_pointwise_quadrature() {
        for fid in [Fidelity::Paper, Fidelity::Corrected] {
            let p = params(0.01, 200.0, fid);
            let d = ChGapDistribution::new(&p).unwrap();
            for &x in &[250.0, 399.0, 401.0, 650.0, 1234.0, 3000.0] {
                let q = ch_gap_pdf(x, &p).unwrap();
                assert!((d.pdf(x) - q).abs() < 1e-12, "{fid} x={x}: {} vs {q}", d.pdf(x));
            }
        }
    }

    #[test]
    fn normalised_and_mean_decomposes() {
        for &(rho, r0) in &[
            (0.005, 200.0),
            (0.02, 100.0),
            (0.08, 400.0),
            (0.2, 200.0),
            (1e-4, 200.0),
        ] {
            for fid in [Fidelity::Paper, Fidelity::Corrected] {
                let p = params(rho, r0, fid);
                let d = ChGapDistribution::new(&p).unwrap();
                assert!(
                    (d.total_mass() - 1.0).abs() < 1e-9,
                    "{rho} {r0} {fid}: {}",
                    d.total_mass()
                );
                let want = expected_cluster_length(&p) + r0 + 1.0 / rho;
                let got = d.mean().unwrap();
                assert!(((got - want) / want).abs() < 1e-8, "{rho} {r0} {fid}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cdf_and_survival_agree() {
        let d = ChGapDistribution::new(&params(0.02, 200.0, Fidelity::Corrected)).unwrap();
        assert_eq!(d.cdf(200.0), 0.0);
        assert!(d.cdf(d.x_max()) >= 1.0 - 1e-6);
        assert!(d.survival(d.x_max()) <= 1.1e-9);
        let mut prev = 0.0;
        for i in 0..400 {
            let x = 150.0 + i as f64 * 20.0;
            let c = d.cdf(x);
            assert!(c >= prev);
            assert!((c + d.survival(x) - 1.0).abs() < 1e-10, "x={x}");
            prev = c;
        }
    }

    #[test]
    fn dense_traffic_has_huge_mean() {
        let p = params(0.2, 200.0, Fidelity::Corrected);
        let d = ChGapDistribution::new(&p).unwrap();
        let m = d.mean().unwrap();
        assert!(m > 1e17 && m.is_finite());
        let c = d.cdf(m);
        assert!(c > 0.0 && c < 1.0);
    }
}
