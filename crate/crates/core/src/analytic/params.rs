use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalyticError;

const KMH_TO_MPS: f64 = 1000.0 / 3600.0;

/// Relative half-width used to stand in for a single fixed speed while
/// keeping `a < b`.
pub const DEGENERATE_SPEED_SPREAD: f64 = 1e-9;

/// A speed with its unit fixed at construction. Stored in m/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Speed(f64);

impl Speed {
    pub fn mps(v: f64) -> Self {
        Speed(v)
    }

    pub fn kmh(v: f64) -> Self {
        Speed(v * KMH_TO_MPS)
    }

    pub fn as_mps(self) -> f64 {
        self.0
    }

    pub fn as_kmh(self) -> f64 {
        self.0 / KMH_TO_MPS
    }
}

impl FromStr for Speed {
    type Err = String;

    /// Accepts `60kmh`, `16.7mps`, `60 km/h` and `16.7 m/s`. Bare numbers are refused.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let (num, ctor): (&str, fn(f64) -> Speed) = if let Some(n) = t.strip_suffix("kmh") {
            (n, Speed::kmh)
        } else if let Some(n) = t.strip_suffix("km/h") {
            (n, Speed::kmh)
        } else if let Some(n) = t.strip_suffix("mps") {
            (n, Speed::mps)
        } else if let Some(n) = t.strip_suffix("m/s") {
            (n, Speed::mps)
        } else {
            return Err(format!("speed `{s}` needs a unit suffix (kmh or mps)"));
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("speed `{s}` has no valid number"))?;
        Ok(ctor(v))
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}mps", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Cluster length as the conditional law alone, gap law built from it.
    Paper,
    /// Adds the single-vehicle cluster atom at zero length.
    #[default]
    Corrected,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Paper => "paper",
            Fidelity::Corrected => "corrected",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Fidelity::Paper => Fidelity::Corrected,
            Fidelity::Corrected => Fidelity::Paper,
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fidelity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Fidelity::Paper),
            "corrected" => Ok(Fidelity::Corrected),
            other => Err(format!("unknown fidelity `{other}` (expected paper or corrected)")),
        }
    }
}

/// All scalar model inputs, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Vehicles per metre.
    pub rho: f64,
    /// Vehicle communication range, m.
    pub r0: f64,
    /// BS spacing and coverage width, m.
    pub d: f64,
    /// Minimum speed, m/s.
    pub a: f64,
    /// Maximum speed, m/s.
    pub b: f64,
    /// Power saved while asleep, W.
    pub p0: f64,
    /// Energy of one off/on switching pair, J.
    pub ec: f64,
    pub fidelity: Fidelity,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: f64,
        r0: f64,
        d: f64,
        a: Speed,
        b: Speed,
        p0: f64,
        ec: f64,
        fidelity: Fidelity,
    ) -> Result<Self, AnalyticError> {
        let p = ModelParams {
            rho,
            r0,
            d,
            a: a.as_mps(),
            b: b.as_mps(),
            p0,
            ec,
            fidelity,
        };
        p.validate()?;
        Ok(p)
    }

    /// D = 800 m, P0 = 1 kW, Ec = 10 J, r0 = 200 m, speeds 40 to 80 km/h.
    pub fn canonical(rho: f64) -> Result<Self, AnalyticError> {
        Self::new(
            rho,
            200.0,
            800.0,
            Speed::kmh(40.0),
            Speed::kmh(80.0),
            1000.0,
            10.0,
            Fidelity::Corrected,
        )
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        fn check(ok: bool, field: &'static str, constraint: &'static str) -> Result<(), AnalyticError> {
            if ok {
                Ok(())
            } else {
                Err(AnalyticError::InvalidParams { field, constraint })
            }
        }
        check(self.rho > 0.0 && self.rho.is_finite(), "rho", "must be finite and > 0")?;
        check(self.r0 > 0.0 && self.r0.is_finite(), "r0", "must be finite and > 0")?;
        check(self.d > 0.0 && self.d.is_finite(), "D", "must be finite and > 0")?;
        check(self.a > 0.0 && self.a.is_finite(), "a", "must be finite and > 0")?;
        check(self.b > self.a && self.b.is_finite(), "b", "must be finite and > a")?;
        check(self.p0 > 0.0 && self.p0.is_finite(), "P0", "must be finite and > 0")?;
        check(self.ec >= 0.0 && self.ec.is_finite(), "Ec", "must be finite and >= 0")?;
        check(self.rho * self.r0 <= MAX_RHO_R0, "rho*r0", "must be <= 600")?;
        Ok(())
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self, AnalyticError> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn with_r0(mut self, r0: f64) -> Result<Self, AnalyticError> {
        self.r0 = r0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_speeds(mut self, a: Speed, b: Speed) -> Result<Self, AnalyticError> {
        self.a = a.as_mps();
        self.b = b.as_mps();
        self.validate()?;
        Ok(self)
    }

    /// Replaces the speed law by a near point mass at `v`.
    pub fn with_degenerate_speed(mut self, v: Speed) -> Result<Self, AnalyticError> {
        let v = v.as_mps();
        self.a = v * (1.0 - DEGENERATE_SPEED_SPREAD);
        self.b = v * (1.0 + DEGENERATE_SPEED_SPREAD);
        self.validate()?;
        Ok(self)
    }

    pub fn rho_r0(&self) -> f64 {
        self.rho * self.r0
    }

    /// Probability that a cluster holds a single vehicle, `e^{-ρ r0}`.
    pub fn singleton_prob(&self) -> f64 {
        (-self.rho_r0()).exp()
    }

    /// `E[V] = (a + b) / 2`.
    pub fn mean_speed(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// `E[1/V] = ln(b/a) / (b - a)`.
    pub fn mean_inv_speed(&self) -> f64 {
        let w = self.b - self.a;
        (w / self.a).ln_1p() / w
    }
}

/// Beyond this the model's `e^{ρ r0}` factors leave double range.
pub const MAX_RHO_R0: f64 = 600.0;
