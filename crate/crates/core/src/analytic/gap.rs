//! Pointwise gap densities: the inter-cluster gap, the cluster-head gap by
//! direct quadrature, and the closed-form branches.

use std::cell::OnceCell;

use crate::numerics::{compensated_sum, integrate_piecewise, QuadratureSpec};

use super::cluster::{cluster_len_pdf, ln_expm1, RenewalDensity};
use super::{AnalyticError, Fidelity, ModelParams};

/// Agreement required between the closed form and quadrature.
pub const CLOSED_FORM_REL_TOL: f64 = 1e-6;

/// Density of the inter-cluster gap `x1 = r0 + Exp(ρ)`.
pub fn intercluster_gap_pdf(x1: f64, params: &ModelParams) -> f64 {
    if x1 > params.r0 {
        params.rho * (-params.rho * (x1 - params.r0)).exp()
    } else {
        0.0
    }
}

/// First branch of the paper-fidelity head-gap density, `r0 <= x < 2 r0`.
pub fn ch_gap_pdf_first_branch(x: f64, params: &ModelParams) -> f64 {
    let (rho, r0) = (params.rho, params.r0);
    if x < r0 {
        return 0.0;
    }
    rho * -(-rho * (x - r0)).exp_m1() / params.rho_r0().exp_m1()
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        max_subdivisions: 50,
        tail_mass_tol: 1e-15,
    }
}

/// Paper-fidelity head-gap density by quadrature of the convolution
/// `ρ ∫_0^{x - r0} e^{-ρ(x - r0 - y)} f_{x0}(y) dy`, split at multiples of `r0`.
///
/// Uses the cluster-length series where it is well conditioned and the
/// tabulated renewal density elsewhere.
pub fn ch_gap_pdf_quadrature(x: f64, params: &ModelParams) -> Result<f64, AnalyticError> {
    params.validate()?;
    let (rho, r0) = (params.rho, params.r0);
    let z = x - r0;
    if !(z > 0.0) {
        return Ok(0.0);
    }
    let kernel: OnceCell<Result<RenewalDensity, AnalyticError>> = OnceCell::new();
    let inv_mass = (-ln_expm1(params.rho_r0())).exp();
    let failure: OnceCell<AnalyticError> = OnceCell::new();
    let f_x0 = |y: f64| -> f64 {
        match cluster_len_pdf(y, params) {
            Ok(s) if s.trusted => s.value,
            _ => match kernel.get_or_init(|| RenewalDensity::new(rho, r0)) {
                Ok(k) => k.eval(y) * inv_mass,
                Err(e) => {
                    let _ = failure.set(e.clone());
                    0.0
                }
            },
        }
    };
    let mut breaks = vec![0.0];
    let mut k = 1.0;
    while k * r0 < z {
        breaks.push(k * r0);
        k += 1.0;
    }
    breaks.push(z);
    let integral = integrate_piecewise(|y| (-rho * (z - y)).exp() * f_x0(y), &breaks, &quad_spec())?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(rho * integral)
}

/// Head-gap density at `x` for the fidelity carried by `params`.
///
/// Below `2 r0` the paper-fidelity part uses the first-branch closed form;
/// above it the convolution is integrated directly.
pub fn ch_gap_pdf(x: f64, params: &ModelParams) -> Result<f64, AnalyticError> {
    params.validate()?;
    let r0 = params.r0;
    if !(x >= 0.0) {
        return Err(AnalyticError::Domain(format!("gap must be >= 0, got {x}")));
    }
    if x < r0 {
        return Ok(0.0);
    }
    let paper = if x < 2.0 * r0 {
        ch_gap_pdf_first_branch(x, params)
    } else {
        ch_gap_pdf_quadrature(x, params)?
    };
    Ok(match params.fidelity {
        Fidelity::Paper => paper,
        Fidelity::Corrected => {
            let p = params.singleton_prob();
            p * intercluster_gap_pdf(x, params) + (1.0 - p) * paper
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormVariant {
    /// The double sum with the trailing brace outside the outer sum and the
    /// floor term used without a length unit.
    Printed,
    /// Trailing brace inside the outer sum, floor term scaled by `r0`.
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormValue {
    pub value: f64,
    /// Quadrature value the closed form was checked against.
    pub reference: f64,
    pub cancellation_index: f64,
    /// Set when the closed form disagrees with quadrature, overflowed or
    /// cancelled beyond trust. Flagged values must not be used.
    pub flagged: bool,
}

/// `e^{ρa} (-ρa)^m / m!` as (sign, ln|.|).
fn signed_log_term(rho: f64, a: f64, m: usize, ln_fact: f64) -> (f64, f64) {
    let base = -rho * a;
    if m == 0 {
        return (1.0, rho * a);
    }
    if base == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let sign = if base < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    (sign, rho * a + m as f64 * base.abs().ln() - ln_fact)
}

/// Paper-fidelity head-gap density for `x >= 2 r0` from the double-sum
/// closed form, checked against [`ch_gap_pdf_quadrature`].
pub fn ch_gap_pdf_closed_form(
    x: f64,
    params: &ModelParams,
    variant: ClosedFormVariant,
) -> Result<ClosedFormValue, AnalyticError> {
    params.validate()?;
    let (rho, r0) = (params.rho, params.r0);
    if !(x >= 2.0 * r0) {
        return Err(AnalyticError::Domain(format!(
            "closed form needs x >= 2 r0 = {}, got {x}",
            2.0 * r0
        )));
    }
    let big_k = (x / r0 - 1.0).floor() as usize;
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=big_k + 1).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_pre = rho.ln() - rho * (x - r0) - ln_expm1(params.rho_r0());
    let mut terms = Vec::new();
    let mut push = |sign: f64, ln_mag: f64, scale: f64| {
        if sign != 0.0 {
            terms.push(scale * sign * (ln_pre + ln_mag).exp());
        }
    };
    for k in 0..=big_k {
        for (m, &lf) in ln_fact.iter().enumerate().take(k) {
            let (s1, l1) = signed_log_term(rho, (k - m) as f64 * r0, m, lf);
            let (s2, l2) = signed_log_term(rho, (k - m) as f64 * r0 - r0, m, lf);
            push(s1, l1, 1.0);
            push(s2, l2, -1.0);
        }
        if variant == ClosedFormVariant::Repaired {
            let kf = k as f64;
            let (s1, l1) = signed_log_term(rho, x - kf * r0 - r0, k, ln_fact[k]);
            let (s2, l2) = signed_log_term(rho, big_k as f64 * r0 - kf * r0, k, ln_fact[k]);
            push(s1, l1, 1.0);
            push(s2, l2, -1.0);
        }
    }
    if variant == ClosedFormVariant::Printed {
        let k = big_k;
        let kf = k as f64;
        let (s1, l1) = signed_log_term(rho, x - kf * r0 - r0, k, ln_fact[k]);
        let (s2, l2) = signed_log_term(rho, kf - kf * r0, k, ln_fact[k]);
        push(s1, l1, 1.0);
        push(s2, l2, -1.0);
    }
    let sum = compensated_sum(terms.iter().copied());
    let reference = ch_gap_pdf_quadrature(x, params)?;
    let value = sum.sum;
    let flagged = !value.is_finite()
        || terms.iter().any(|t| !t.is_finite())
        || sum.cancellation_index > super::cluster::CANCELLATION_LIMIT
        || (value - reference).abs() > CLOSED_FORM_REL_TOL * reference.abs();
    Ok(ClosedFormValue {
        value,
        reference,
        cancellation_index: sum.cancellation_index,
        flagged,
    })
}
