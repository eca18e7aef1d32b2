use super::NumericsError;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MAX_ITERATIONS: usize = 500;

/// Exponential integral `E1(z) = ∫_z^∞ e^{-t}/t dt` for `z > 0`.
///
/// Power series for `z <= 1`, Lentz continued fraction above.
pub fn exp_integral_e1(z: f64) -> Result<f64, NumericsError> {
    check_domain(z)?;
    if z <= 1.0 {
        Ok(series(z))
    } else {
        Ok(continued_fraction(z)? * (-z).exp())
    }
}

/// `e^z E1(z)`, finite for large `z` where `E1` alone underflows.
pub fn exp_scaled_e1(z: f64) -> Result<f64, NumericsError> {
    check_domain(z)?;
    if z <= 1.0 {
        Ok(series(z) * z.exp())
    } else {
        continued_fraction(z)
    }
}

fn check_domain(z: f64) -> Result<(), NumericsError> {
    if z > 0.0 && !z.is_nan() {
        Ok(())
    } else {
        Err(NumericsError::Domain(format!("E1 requires z > 0, got {z}")))
    }
}

fn series(z: f64) -> f64 {
    // E1(z) = -gamma - ln z - sum_{k>=1} (-z)^k / (k * k!)
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..MAX_ITERATIONS {
        let kf = k as f64;
        term *= -z / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// Continued fraction for `e^z E1(z)`, modified Lentz.
fn continued_fraction(z: f64) -> Result<f64, NumericsError> {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITERATIONS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < f64::EPSILON {
            return Ok(h);
        }
    }
    Err(NumericsError::Domain(format!(
        "E1 continued fraction did not converge at z = {z}"
    )))
}
