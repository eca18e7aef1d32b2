//! Flat TOML config file plus flag overrides, resolved into [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::analytic::{Fidelity, ModelParams, Speed};
use crate::experiments::{Metric, OutputFormat, Preset};

use super::CliError;

pub const WORKERS_ENV: &str = "SLEEPNET_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Cycles,
    TimelineCommon,
    TimelineHeterogeneous,
}

impl SimMode {
    pub fn name(self) -> &'static str {
        match self {
            SimMode::Cycles => "cycles",
            SimMode::TimelineCommon => "timeline-common",
            SimMode::TimelineHeterogeneous => "timeline-heterogeneous",
        }
    }
}

/// Speed text that parses back to exactly `s`, in km/h when possible.
fn speed_text(s: Speed) -> String {
    let kmh = format!("{}kmh", s.as_kmh());
    if kmh.parse::<Speed>() == Ok(s) {
        kmh
    } else {
        s.to_string()
    }
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rho: Option<f64>,
    pub r0: Option<f64>,
    #[serde(alias = "D")]
    pub d: Option<f64>,
    pub a: Option<toml::Value>,
    pub b: Option<toml::Value>,
    #[serde(alias = "P0")]
    pub p0: Option<f64>,
    #[serde(alias = "Ec")]
    pub ec: Option<f64>,
    pub fidelity: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub mode: Option<String>,
    pub n: Option<usize>,
    pub duration: Option<f64>,
    pub window: Option<f64>,
    pub v: Option<toml::Value>,
    pub rho_values: Option<Vec<f64>>,
    pub r0_values: Option<Vec<f64>>,
    pub metrics: Option<Vec<String>>,
    pub preset: Option<Vec<String>>,
    pub mismatched: Option<bool>,
    pub both_fidelities: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
    }
}

fn file_speed(value: &Option<toml::Value>, field: &str) -> Result<Option<Speed>, CliError> {
    match value {
        None => Ok(None),
        Some(toml::Value::String(s)) => s
            .parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("{field}: {e}"))),
        Some(other) => Err(CliError::Config(format!(
            "{field}: speed `{other}` needs a unit suffix, e.g. \"60kmh\" or \"16.7mps\""
        ))),
    }
}

fn file_parse<T: std::str::FromStr<Err = String>>(value: &Option<String>, field: &str) -> Result<Option<T>, CliError> {
    value
        .as_deref()
        .map(|s| s.parse::<T>().map_err(|e| CliError::Config(format!("{field}: {e}"))))
        .transpose()
}

/// Values given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rho: Option<f64>,
    pub r0: Option<f64>,
    pub d: Option<f64>,
    pub a: Option<Speed>,
    pub b: Option<Speed>,
    pub p0: Option<f64>,
    pub ec: Option<f64>,
    pub fidelity: Option<Fidelity>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub mode: Option<SimMode>,
    pub n: Option<usize>,
    pub duration: Option<f64>,
    pub window: Option<f64>,
    pub v: Option<Speed>,
    pub rho_values: Option<Vec<f64>>,
    pub r0_values: Option<Vec<f64>>,
    pub metrics: Option<Vec<Metric>>,
    pub presets: Option<Vec<Preset>>,
    pub mismatched: bool,
    pub both_fidelities: bool,
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub rho: Option<f64>,
    pub r0: f64,
    pub d: f64,
    pub a: Speed,
    pub b: Speed,
    pub p0: f64,
    pub ec: f64,
    pub fidelity: Fidelity,
    pub seed: u64,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub mode: SimMode,
    pub n: Option<usize>,
    pub duration: f64,
    pub window: Option<f64>,
    pub v: Speed,
    pub rho_values: Option<Vec<f64>>,
    pub r0_values: Option<Vec<f64>>,
    pub metrics: Option<Vec<Metric>>,
    pub presets: Vec<Preset>,
    pub mismatched: bool,
    pub both_fidelities: bool,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_DURATION: f64 = 86_400.0;

impl RunConfig {
    /// Flags win over the environment, which wins over the file.
    pub fn resolve(
        command: &'static str,
        file: &FileConfig,
        flags: Overrides,
        env_workers: Option<&str>,
    ) -> Result<Self, CliError> {
        let env_workers = env_workers
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{WORKERS_ENV}: `{s}` is not a worker count")))
            })
            .transpose()?;
        let metrics = match (&flags.metrics, &file.metrics) {
            (Some(m), _) => Some(m.clone()),
            (None, Some(names)) => Some(
                names
                    .iter()
                    .map(|s| {
                        s.parse::<Metric>()
                            .map_err(|e| CliError::Config(format!("metrics: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            (None, None) => None,
        };
        let presets = match (&flags.presets, &file.preset) {
            (Some(p), _) => p.clone(),
            (None, Some(names)) => names
                .iter()
                .map(|s| {
                    s.parse::<Preset>()
                        .map_err(|e| CliError::Config(format!("preset: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, None) => Vec::new(),
        };
        let mode = match (flags.mode, &file.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => SimMode::from_str(s, true).map_err(|_| {
                CliError::Config(format!(
                    "mode: unknown mode `{s}` (expected cycles, timeline-common or timeline-heterogeneous)"
                ))
            })?,
            (None, None) => SimMode::Cycles,
        };
        let cfg = RunConfig {
            command,
            rho: flags.rho.or(file.rho),
            r0: flags.r0.or(file.r0).unwrap_or(200.0),
            d: flags.d.or(file.d).unwrap_or(800.0),
            a: flags.a.or(file_speed(&file.a, "a")?).unwrap_or(Speed::kmh(40.0)),
            b: flags.b.or(file_speed(&file.b, "b")?).unwrap_or(Speed::kmh(80.0)),
            p0: flags.p0.or(file.p0).unwrap_or(1000.0),
            ec: flags.ec.or(file.ec).unwrap_or(10.0),
            fidelity: flags
                .fidelity
                .or(file_parse(&file.fidelity, "fidelity")?)
                .unwrap_or_default(),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            format: flags.format.or(file_parse(&file.format, "format")?),
            out: flags.out.or_else(|| file.out.clone()),
            workers: flags.workers.or(env_workers).or(file.workers),
            mode,
            n: flags.n.or(file.n),
            duration: flags.duration.or(file.duration).unwrap_or(DEFAULT_DURATION),
            window: flags.window.or(file.window),
            v: flags.v.or(file_speed(&file.v, "v")?).unwrap_or(Speed::kmh(60.0)),
            rho_values: flags.rho_values.or_else(|| file.rho_values.clone()),
            r0_values: flags.r0_values.or_else(|| file.r0_values.clone()),
            metrics,
            presets,
            mismatched: flags.mismatched || file.mismatched.unwrap_or(false),
            both_fidelities: flags.both_fidelities || file.both_fidelities.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.workers == Some(0) {
            return Err(CliError::Config("workers: must be >= 1".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(CliError::Config("duration: must be finite and > 0".into()));
        }
        if let Some(w) = self.window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::Config("window: must be finite and > 0".into()));
            }
        }
        if !(self.v.as_mps() > 0.0 && self.v.as_mps().is_finite()) {
            return Err(CliError::Config("v: must be finite and > 0".into()));
        }
        for (name, values) in [("rho_values", &self.rho_values), ("r0_values", &self.r0_values)] {
            if matches!(values, Some(v) if v.is_empty()) {
                return Err(CliError::Config(format!("{name}: must not be empty")));
            }
        }
        // a template with a stand-in density catches bad constants early
        self.params_with_rho(self.rho.unwrap_or(1e-3)).map(|_| ())
    }

    fn params_with_rho(&self, rho: f64) -> Result<ModelParams, CliError> {
        ModelParams::new(rho, self.r0, self.d, self.a, self.b, self.p0, self.ec, self.fidelity).map_err(CliError::from)
    }

    /// Parameters of a single-point command; ρ must be given.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let rho = self
            .rho
            .ok_or_else(|| CliError::Config("missing required field rho (vehicle density, 1/m)".into()))?;
        self.params_with_rho(rho)
    }

    /// Grid template: the given ρ, else the first of `rho_values`.
    pub fn template(&self) -> Result<ModelParams, CliError> {
        let rho = self
            .rho
            .or_else(|| self.rho_values.as_ref().and_then(|v| v.first().copied()))
            .unwrap_or(0.01);
        self.params_with_rho(rho)
    }

    /// TOML that reproduces this run when passed back with `--config`.
    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::new();
        let mut put = |k: &str, v: toml::Value| {
            t.insert(k.to_string(), v);
        };
        if let Some(rho) = self.rho {
            put("rho", rho.into());
        }
        put("r0", self.r0.into());
        put("D", self.d.into());
        put("a", speed_text(self.a).into());
        put("b", speed_text(self.b).into());
        put("P0", self.p0.into());
        put("Ec", self.ec.into());
        put("fidelity", self.fidelity.to_string().into());
        put("seed", toml::Value::Integer(self.seed as i64));
        if let Some(f) = self.format {
            put("format", f.to_string().into());
        }
        if let Some(o) = &self.out {
            put("out", o.display().to_string().into());
        }
        if let Some(w) = self.workers {
            put("workers", toml::Value::Integer(w as i64));
        }
        match self.command {
            "simulate" => {
                put("mode", self.mode.name().into());
                match self.mode {
                    SimMode::Cycles => {
                        put(
                            "n",
                            toml::Value::Integer(self.n.unwrap_or(super::DEFAULT_SIM_CYCLES) as i64),
                        );
                    }
                    SimMode::TimelineCommon | SimMode::TimelineHeterogeneous => {
                        put("duration", self.duration.into());
                        if let Some(w) = self.window {
                            put("window", w.into());
                        }
                        if self.mode == SimMode::TimelineCommon {
                            put("v", speed_text(self.v).into());
                        }
                    }
                }
            }
            "validate" | "sweep" => {
                let floats = |v: &Vec<f64>| toml::Value::Array(v.iter().map(|&x| x.into()).collect());
                if let Some(v) = &self.rho_values {
                    put("rho_values", floats(v));
                }
                if let Some(v) = &self.r0_values {
                    put("r0_values", floats(v));
                }
                if let Some(m) = &self.metrics {
                    put(
                        "metrics",
                        toml::Value::Array(m.iter().map(|m| m.name().into()).collect()),
                    );
                }
                if self.command == "validate" {
                    put(
                        "n",
                        toml::Value::Integer(self.n.unwrap_or(super::DEFAULT_VALIDATION_CYCLES) as i64),
                    );
                    put("mismatched", self.mismatched.into());
                    put("both_fidelities", self.both_fidelities.into());
                } else if !self.presets.is_empty() {
                    put(
                        "preset",
                        toml::Value::Array(self.presets.iter().map(|p| p.name().into()).collect()),
                    );
                }
            }
            _ => {}
        }
        toml::to_string(&t).expect("flat table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(file: &str, flags: Overrides) -> Result<RunConfig, CliError> {
        RunConfig::resolve("analytic", &FileConfig::parse(file)?, flags, None)
    }

    #[test]
    fn defaults_are_canonical() {
        let c = resolve("rho = 0.01", Overrides::default()).unwrap();
        assert_eq!(c.params().unwrap(), ModelParams::canonical(0.01).unwrap());
    }

    #[test]
    fn flags_override_file() {
        let flags = Overrides {
            r0: Some(100.0),
            ..Default::default()
        };
        let c = resolve("rho = 0.01\nr0 = 300\nD = 500\na = \"50kmh\"", flags).unwrap();
        assert_eq!(c.r0, 100.0);
        assert_eq!(c.d, 500.0);
        assert_eq!(c.a, Speed::kmh(50.0));
    }

    #[test]
    fn bare_speed_is_refused() {
        let err = resolve("a = 40", Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("unit"), "{err}");
    }

    #[test]
    fn unknown_key_is_refused() {
        let err = resolve("rhoo = 0.01", Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("rhoo"), "{err}");
    }

    #[test]
    fn missing_rho_names_field() {
        let c = resolve("", Overrides::default()).unwrap();
        let err = c.params().unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("rho")));
    }

    #[test]
    fn invalid_constant_names_field() {
        let err = resolve("rho = 0.01\nEc = -1", Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("Ec"), "{err}");
    }

    #[test]
    fn workers_precedence() {
        let file = FileConfig::parse("workers = 2").unwrap();
        let c = RunConfig::resolve("sweep", &file, Overrides::default(), Some("3")).unwrap();
        assert_eq!(c.workers, Some(3));
        let flags = Overrides {
            workers: Some(5),
            ..Default::default()
        };
        let c = RunConfig::resolve("sweep", &file, flags, Some("3")).unwrap();
        assert_eq!(c.workers, Some(5));
        assert!(RunConfig::resolve("sweep", &file, Overrides::default(), Some("x")).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let flags = Overrides {
            rho: Some(0.02),
            a: Some(Speed::kmh(30.0)),
            seed: Some(9),
            mode: Some(SimMode::TimelineCommon),
            ..Default::default()
        };
        let c = RunConfig::resolve("simulate", &FileConfig::default(), flags, None).unwrap();
        let again = RunConfig::resolve(
            "simulate",
            &FileConfig::parse(&c.to_toml()).unwrap(),
            Overrides::default(),
            None,
        )
        .unwrap();
        assert_eq!(again, c);
    }
}
