//! Density of a sum of `n` i.i.d. exponentials truncated to `(0, r0]`,
//! by repeated discrete convolution on a uniform grid.
//!
//! Jump points of the base density sit on grid nodes and carry the mean of
//! their one-sided limits, so the discrete convolution is the trapezoid
//! rule applied to a piecewise-smooth integrand.

use super::NumericsError;

/// Fewest grid points per truncation range accepted by the oracle.
pub const MIN_POINTS_PER_RANGE: usize = 64;

/// A density sampled at `x_i = i * step`, zero outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub step: f64,
    pub values: Vec<f64>,
}

impl DensityTable {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn support_end(&self) -> f64 {
        self.x(self.values.len().saturating_sub(1))
    }

    /// Linear interpolation between nodes; zero outside the support.
    pub fn at(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.support_end() || self.values.is_empty() {
            return 0.0;
        }
        let pos = x / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 1);
        if i + 1 >= self.values.len() {
            return self.values[i];
        }
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Trapezoid mass. End nodes already hold half their one-sided value,
    /// so the rule reduces to a plain sum.
    pub fn mass(&self) -> f64 {
        self.step * self.values.iter().sum::<f64>()
    }

    /// Largest absolute pointwise difference over the common grid.
    pub fn sup_distance(&self, other: &DensityTable) -> f64 {
        let n = self.values.len().max(other.values.len());
        (0..n)
            .map(|i| {
                let a = self.values.get(i).copied().unwrap_or(0.0);
                let b = other.values.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TruncExpConvolver {
    rho: f64,
    r0: f64,
    points_per_range: usize,
    base: Vec<f64>,
}

impl TruncExpConvolver {
    pub fn new(rho: f64, r0: f64, points_per_range: usize) -> Result<Self, NumericsError> {
        if !(rho > 0.0 && r0 > 0.0 && rho.is_finite() && r0.is_finite()) {
            return Err(NumericsError::Domain(format!(
                "truncated exponential needs rho > 0 and r0 > 0, got rho = {rho}, r0 = {r0}"
            )));
        }
        if points_per_range < MIN_POINTS_PER_RANGE {
            return Err(NumericsError::GridTooCoarse {
                points_per_range,
                required: MIN_POINTS_PER_RANGE,
            });
        }
        let h = r0 / points_per_range as f64;
        let mut base: Vec<f64> = (0..=points_per_range)
            .map(|i| truncated_exp_density(rho, r0, i as f64 * h))
            .collect();
        // one-sided limits at the two jumps
        base[0] = 0.5 * truncated_exp_density(rho, r0, f64::MIN_POSITIVE);
        base[points_per_range] = 0.5 * truncated_exp_density(rho, r0, r0);
        Ok(Self {
            rho,
            r0,
            points_per_range,
            base,
        })
    }

    pub fn step(&self) -> f64 {
        self.r0 / self.points_per_range as f64
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn base(&self) -> DensityTable {
        DensityTable {
            step: self.step(),
            values: self.base.clone(),
        }
    }

    pub fn convolve(&self, a: &DensityTable) -> DensityTable {
        let h = self.step();
        let k = self.base.len();
        let len = a.values.len() + k - 1;
        let mut out = vec![0.0; len];
        for (i, &ai) in a.values.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in self.base.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        for v in &mut out {
            *v *= h;
        }
        DensityTable { step: h, values: out }
    }

    pub fn nfold(&self, n: usize) -> Result<DensityTable, NumericsError> {
        if n == 0 {
            return Err(NumericsError::Domain("n-fold convolution needs n >= 1".into()));
        }
        let mut table = self.base();
        for _ in 1..n {
            table = self.convolve(&table);
        }
        Ok(table)
    }
}

/// `ρ e^{-ρy} / (1 - e^{-ρ r0})` on `(0, r0]`, zero elsewhere.
pub(crate) fn truncated_exp_density(rho: f64, r0: f64, y: f64) -> f64 {
    if y > 0.0 && y <= r0 {
        rho * (-rho * y).exp() / -(-rho * r0).exp_m1()
    } else {
        0.0
    }
}

/// Density of the sum of `n` truncated exponentials on a grid with
/// `points_per_range` intervals per `r0`; support is `[0, n r0]`.
pub fn trunc_exp_nfold_pdf(
    n: usize,
    rho: f64,
    r0: f64,
    points_per_range: usize,
) -> Result<DensityTable, NumericsError> {
    TruncExpConvolver::new(rho, r0, points_per_range)?.nfold(n)
}
