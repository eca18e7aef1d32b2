//! The `sleepnet` command line. Exit codes: 0 ok, 1 validation failed,
//! 2 config error, 3 numeric or output failure.

mod config;

pub use config::{FileConfig, Overrides, RunConfig, SimMode, DEFAULT_DURATION, DEFAULT_SEED, WORKERS_ENV};

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analytic::{baseline_power_saved, AnalyticError, ChGapDistribution, Fidelity, ModelParams, Speed};
use crate::experiments::{
    default_validation_grid, emit_table, run_sweeps, run_validation, ExperimentsError, Metric, OutputFormat, Preset,
    SweepGrid, SweepTable, TableMeta, TableRow, ValidationOptions, VALIDATED_METRICS,
};
use crate::simulate::{
    min_window_length, required_timeline_window, run_timeline, CycleAccumulator, CycleSampler, Estimate, RngSpec,
    SimulateError, SpeedMode, TimelineReport,
};

pub const DEFAULT_SIM_CYCLES: usize = 1_000_000;
pub const DEFAULT_VALIDATION_CYCLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "output",
        }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::InvalidParams { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::Analytic(e) => e.into(),
            SimulateError::WindowTooSmall { .. } | SimulateError::TooFewSamples { .. } => {
                CliError::Config(e.to_string())
            }
            SimulateError::Domain(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ExperimentsError> for CliError {
    fn from(e: ExperimentsError) -> Self {
        match e {
            ExperimentsError::Analytic(e) => e.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sleepnet",
    version,
    about = "Base-station sleep scheduling in multi-hop vehicular networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate E[X], P{X > D}, E[T_off], E[P_save] and the no-relay baseline.
    #[command(allow_negative_numbers = true)]
    Analytic(AnalyticArgs),
    /// Monte Carlo over renewal cycles, or a one-BS timeline.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Compare analytic values with Monte Carlo on a grid; exit 1 on any failure.
    #[command(allow_negative_numbers = true)]
    Validate(ValidateArgs),
    /// Write figure data for presets or a custom grid.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// paper or corrected [default: corrected]
    #[arg(long, global = true)]
    pub fidelity: Option<Fidelity>,
    /// csv or json. Without it, analytic and simulate print text.
    #[arg(long, global = true)]
    pub format: Option<OutputFormat>,
    /// Output file; a directory for `sweep`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; also read from SLEEPNET_WORKERS.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Print failures as a JSON object on stdout.
    #[arg(long, global = true)]
    pub error_json: bool,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Vehicle density, 1/m.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Vehicle communication range, m.
    #[arg(long)]
    pub r0: Option<f64>,
    /// BS coverage width and spacing, m.
    #[arg(long = "d", visible_alias = "D")]
    pub d: Option<f64>,
    /// Minimum speed with unit, e.g. 40kmh.
    #[arg(long)]
    pub a: Option<Speed>,
    /// Maximum speed with unit, e.g. 80kmh.
    #[arg(long)]
    pub b: Option<Speed>,
    /// Power saved while asleep, W.
    #[arg(long = "p0", visible_alias = "P0")]
    pub p0: Option<f64>,
    /// Energy per off/on switching pair, J.
    #[arg(long = "ec", visible_alias = "Ec")]
    pub ec: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub mode: Option<SimMode>,
    /// Cycles to sample in `cycles` mode.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulated time in timeline modes, s.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Road window in timeline modes, m. Defaults to the smallest valid one.
    #[arg(long)]
    pub window: Option<f64>,
    /// Common speed for `timeline-common`, e.g. 60kmh.
    #[arg(long)]
    pub v: Option<Speed>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Comma-separated densities, 1/m
    #[arg(long, value_delimiter = ',')]
    pub rho_values: Option<Vec<f64>>,
    /// Comma-separated ranges, m
    #[arg(long, value_delimiter = ',')]
    pub r0_values: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Cycles per cell.
    #[arg(long)]
    pub n: Option<usize>,
    /// Pair each analytic fidelity with the other sampler.
    #[arg(long)]
    pub mismatched: bool,
    /// Check both fidelities instead of only `--fidelity`.
    #[arg(long)]
    pub both_fidelities: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// fig2, fig3, fig4, fig5; comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub preset: Option<Vec<Preset>>,
    /// Metrics of a custom grid.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
}

fn base_overrides(common: &CommonArgs, p: &ParamArgs) -> Overrides {
    Overrides {
        rho: p.rho,
        r0: p.r0,
        d: p.d,
        a: p.a,
        b: p.b,
        p0: p.p0,
        ec: p.ec,
        fidelity: common.fidelity,
        seed: common.seed,
        format: common.format,
        out: common.out.clone(),
        workers: common.workers,
        ..Default::default()
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Analytic(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Validate(a) => &a.common,
            Command::Sweep(a) => &a.common,
        }
    }

    fn resolve(&self, env_workers: Option<&str>) -> Result<RunConfig, CliError> {
        let common = self.common();
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let (name, flags) = match self {
            Command::Analytic(a) => ("analytic", base_overrides(common, &a.params)),
            Command::Simulate(a) => (
                "simulate",
                Overrides {
                    mode: a.mode,
                    n: a.n,
                    duration: a.duration,
                    window: a.window,
                    v: a.v,
                    ..base_overrides(common, &a.params)
                },
            ),
            Command::Validate(a) => (
                "validate",
                Overrides {
                    rho_values: a.grid.rho_values.clone(),
                    r0_values: a.grid.r0_values.clone(),
                    n: a.n,
                    mismatched: a.mismatched,
                    both_fidelities: a.both_fidelities,
                    ..base_overrides(common, &a.params)
                },
            ),
            Command::Sweep(a) => (
                "sweep",
                Overrides {
                    rho_values: a.grid.rho_values.clone(),
                    r0_values: a.grid.r0_values.clone(),
                    presets: a.preset.clone(),
                    metrics: a.metrics.clone(),
                    ..base_overrides(common, &a.params)
                },
            ),
        };
        RunConfig::resolve(name, &file, flags, env_workers)
    }
}

/// Where a command's main output goes.
struct Sink<'a> {
    out: Option<&'a Path>,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn write(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        match self.out {
            Some(path) => {
                fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
            }
            None => Ok(self.stdout.write_all(bytes)?),
        }
    }
}

fn table_bytes(table: &SweepTable, format: OutputFormat) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    emit_table(table, format, &mut buf)?;
    Ok(buf)
}

fn row(params: &ModelParams, metric: &str, value: Option<f64>, stderr: Option<f64>, status: &str) -> TableRow {
    let mut r = TableRow::new(params, metric);
    r.value = value;
    r.stderr = stderr;
    r.status = status.to_string();
    r
}

fn cmd_analytic(cfg: &RunConfig, sink: &mut Sink) -> Result<i32, CliError> {
    let p = cfg.params()?;
    let dist = ChGapDistribution::new(&p)?;
    let f = dist.energy_figures()?;
    let clamped = dist.expected_power_saved_clamped()?;
    let baseline = baseline_power_saved(&p)?;
    match cfg.format {
        None => {
            let t_off = match f.expected_sleep_time {
                Some(t) => format!("{t:.10e} s"),
                None => "unavailable (no sleep opportunity)".to_string(),
            };
            let text = format!(
                "fidelity             {}\n\
                 E[X]                 {:.10e} m\n\
                 P{{X > D}}             {:.10e}\n\
                 E[T_off]             {t_off}\n\
                 E[P_save]            {:.10e} W\n\
                 E[max(P_save, 0)]    {:.10e} W\n\
                 baseline P_save      {:.10e} W\n",
                p.fidelity, f.expected_gap, f.prob_sleep, f.expected_power_saved, clamped, baseline
            );
            sink.write(text.as_bytes())?;
        }
        Some(format) => {
            let mut meta = TableMeta::new("analytic", "single");
            meta.params.push(p);
            let t_off = match f.expected_sleep_time {
                Some(t) => row(&p, Metric::ExpectedSleepTime.name(), Some(t), None, "ok"),
                None => row(&p, Metric::ExpectedSleepTime.name(), None, None, "no_sleep"),
            };
            let rows = vec![
                row(&p, Metric::ExpectedGap.name(), Some(f.expected_gap), None, "ok"),
                row(&p, Metric::ProbSleep.name(), Some(f.prob_sleep), None, "ok"),
                t_off,
                row(
                    &p,
                    Metric::ExpectedPowerSaved.name(),
                    Some(f.expected_power_saved),
                    None,
                    "ok",
                ),
                row(&p, Metric::ExpectedPowerSavedClamped.name(), Some(clamped), None, "ok"),
                row(&p, Metric::BaselinePowerSaved.name(), Some(baseline), None, "ok"),
            ];
            sink.write(&table_bytes(&SweepTable { meta, rows }, format)?)?;
        }
    }
    Ok(0)
}

fn estimate_row(p: &ModelParams, metric: &str, e: Option<Estimate>) -> TableRow {
    match e {
        Some(e) => row(p, metric, Some(e.value), Some(e.std_error), "ok"),
        None => row(p, metric, None, None, "no_sleep"),
    }
}

fn check_timeline(r: &TimelineReport, p: &ModelParams) -> Result<(), CliError> {
    let ok = (0.0..=1.0).contains(&r.sleep_fraction)
        && (r.sleep_time + r.active_time - r.sim_duration).abs() <= 1e-9 * r.sim_duration
        && r.energy_saved == r.sleep_time * p.p0 - 0.5 * r.n_transitions as f64 * p.ec;
    if ok {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "timeline report violates its invariants: {r:?}"
        )))
    }
}

fn cmd_simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<i32, CliError> {
    let p = cfg.params()?;
    let rng = RngSpec::new(cfg.seed, 0);
    let mut meta = TableMeta::new("simulate", cfg.mode.name());
    meta.seed = Some(cfg.seed);
    meta.params.push(p);
    let (rows, text) = match cfg.mode {
        SimMode::Cycles => {
            let n = cfg.n.unwrap_or(DEFAULT_SIM_CYCLES);
            let sampler = CycleSampler::new(&p, p.fidelity);
            let mut r = rng.rng();
            let mut acc = CycleAccumulator::new();
            for _ in 0..n {
                acc.push(&sampler.sample(&mut r));
            }
            let e = acc.finish()?;
            meta.n_cycles = Some(e.n_cycles);
            let rows = vec![
                estimate_row(&p, Metric::ExpectedGap.name(), Some(e.expected_gap)),
                estimate_row(&p, Metric::ProbSleep.name(), Some(e.prob_sleep)),
                estimate_row(&p, Metric::ExpectedSleepTime.name(), e.expected_sleep_time),
                estimate_row(&p, Metric::ExpectedPowerSaved.name(), Some(e.expected_power_saved)),
                estimate_row(
                    &p,
                    Metric::ExpectedPowerSavedClamped.name(),
                    Some(e.expected_power_saved_clamped),
                ),
                row(&p, "sleep_time_fraction", Some(e.sleep_time_fraction), None, "ok"),
                row(&p, "time_average_Psave", Some(e.time_average_power_saved), None, "ok"),
            ];
            let pm = |e: Estimate| format!("{:.10e} +/- {:.3e}", e.value, e.std_error);
            let text = format!(
                "mode                 cycles\n\
                 fidelity             {}\n\
                 seed                 {}\n\
                 cycles               {}\n\
                 E[X]                 {} m\n\
                 P{{X > D}}             {}\n\
                 E[T_off]             {}\n\
                 E[P_save]            {} W\n\
                 E[max(P_save, 0)]    {} W\n\
                 sleep time fraction  {:.10e}\n\
                 time-average saving  {:.10e} W\n",
                p.fidelity,
                cfg.seed,
                e.n_cycles,
                pm(e.expected_gap),
                pm(e.prob_sleep),
                e.expected_sleep_time
                    .map(|t| format!("{} s", pm(t)))
                    .unwrap_or_else(|| "unavailable (no sleeping cycle)".into()),
                pm(e.expected_power_saved),
                pm(e.expected_power_saved_clamped),
                e.sleep_time_fraction,
                e.time_average_power_saved,
            );
            (rows, text)
        }
        SimMode::TimelineCommon | SimMode::TimelineHeterogeneous => {
            let mode = match cfg.mode {
                SimMode::TimelineCommon => SpeedMode::Common(cfg.v.as_mps()),
                _ => SpeedMode::Heterogeneous,
            };
            let window = cfg
                .window
                .unwrap_or_else(|| required_timeline_window(&p, cfg.duration, mode).max(min_window_length(&p)) + 1.0);
            let r = run_timeline(&p, cfg.duration, window, mode, &rng)?;
            check_timeline(&r, &p)?;
            let status = if r.complete { "ok" } else { "partial" };
            let cycle_se = r.cycle_power_saved_se.is_finite().then_some(r.cycle_power_saved_se);
            let cycle_mean = r.cycle_mean_power_saved.is_finite().then_some(r.cycle_mean_power_saved);
            let rows = vec![
                row(&p, "sim_duration", Some(r.sim_duration), None, status),
                row(&p, "sleep_fraction", Some(r.sleep_fraction), None, status),
                row(&p, "n_transitions", Some(r.n_transitions as f64), None, status),
                row(&p, "energy_saved", Some(r.energy_saved), None, status),
                row(&p, "mean_power_saved", Some(r.mean_power_saved), None, status),
                row(&p, "n_cycles", Some(r.n_cycles as f64), None, status),
                row(&p, "cycle_mean_power_saved", cycle_mean, cycle_se, status),
            ];
            let text = format!(
                "mode                 {}\n\
                 seed                 {}\n\
                 window               {window} m\n\
                 vehicles             {}\n\
                 complete             {}\n\
                 sim duration         {:.10e} s\n\
                 sleep fraction       {:.10e}\n\
                 transitions          {}\n\
                 energy saved         {:.10e} J\n\
                 mean power saved     {:.10e} W\n\
                 cycles               {}\n\
                 cycle-mean saving    {:.10e} +/- {:.3e} W\n",
                cfg.mode.name(),
                cfg.seed,
                r.n_vehicles,
                r.complete,
                r.sim_duration,
                r.sleep_fraction,
                r.n_transitions,
                r.energy_saved,
                r.mean_power_saved,
                r.n_cycles,
                r.cycle_mean_power_saved,
                r.cycle_power_saved_se,
            );
            (rows, text)
        }
    };
    match cfg.format {
        None => sink.write(text.as_bytes())?,
        Some(format) => sink.write(&table_bytes(&SweepTable { meta, rows }, format)?)?,
    }
    Ok(0)
}

fn custom_grid(cfg: &RunConfig, default_metrics: &[Metric]) -> Result<SweepGrid, CliError> {
    let template = cfg.template()?;
    let rho = cfg.rho_values.clone().or(cfg.rho.map(|r| vec![r]));
    let Some(rho) = rho else {
        return Err(CliError::Config(
            "missing required field rho_values (or rho) for a custom grid".into(),
        ));
    };
    let r0 = cfg.r0_values.clone().unwrap_or(vec![cfg.r0]);
    let metrics = cfg.metrics.clone().unwrap_or_else(|| default_metrics.to_vec());
    Ok(SweepGrid::new(rho, r0, template, metrics)?)
}

fn cmd_validate(cfg: &RunConfig, sink: &mut Sink, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let grid = if cfg.rho_values.is_some() || cfg.r0_values.is_some() || cfg.rho.is_some() {
        custom_grid(cfg, &VALIDATED_METRICS)?
    } else {
        let template = cfg.template()?;
        SweepGrid {
            fixed: template,
            ..default_validation_grid(cfg.fidelity)
        }
    };
    let mut opts = ValidationOptions::new(cfg.n.unwrap_or(DEFAULT_VALIDATION_CYCLES), cfg.seed);
    opts.fidelities = if cfg.both_fidelities {
        vec![Fidelity::Paper, Fidelity::Corrected]
    } else {
        vec![cfg.fidelity]
    };
    opts.mismatched = cfg.mismatched;
    opts.workers = cfg.workers;
    let report = run_validation(&grid, &opts)?;
    let table = report.to_table(&[grid.fixed]);
    sink.write(&table_bytes(&table, cfg.format.unwrap_or_default())?)?;
    let failed: Vec<_> = report.failures().collect();
    writeln!(
        stderr,
        "validation: {}/{} comparisons within {} standard errors",
        report.rows.len() - failed.len(),
        report.rows.len(),
        opts.z_threshold
    )?;
    for r in &failed {
        writeln!(
            stderr,
            "  FAIL {} rho={} r0={} analytic={} sampler={} z={}",
            r.metric,
            r.params.rho,
            r.params.r0,
            r.params.fidelity,
            r.sampler_fidelity,
            r.z.map_or_else(|| r.status.clone(), |z| format!("{z:.2}"))
        )?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let format = cfg.format.unwrap_or_default();
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut jobs: Vec<(String, Vec<SweepGrid>)> = cfg
        .presets
        .iter()
        .map(|p| (p.name().to_string(), p.grids(cfg.fidelity)))
        .collect();
    if jobs.is_empty() {
        let defaults = [
            Metric::ExpectedGap,
            Metric::ExpectedSleepTime,
            Metric::ExpectedPowerSaved,
            Metric::BaselinePowerSaved,
            Metric::ProbSleep,
        ];
        jobs.push(("custom".to_string(), vec![custom_grid(cfg, &defaults)?]));
    }
    for (name, grids) in jobs {
        let mut table = run_sweeps(&grids, &name, cfg.workers);
        table.meta.seed = Some(cfg.seed);
        let path = dir.join(format!("{name}.{}", format.extension()));
        fs::write(&path, table_bytes(&table, format)?)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        writeln!(stdout, "{}", path.display())?;
    }
    Ok(0)
}

fn report_error(e: &CliError, json: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if json {
        let doc = serde_json::json!({
            "error": { "kind": e.kind(), "code": e.exit_code(), "message": e.to_string() }
        });
        let _ = writeln!(stdout, "{doc}");
    } else {
        let _ = writeln!(stderr, "sleepnet: {e}");
    }
    e.exit_code()
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let json = cli.command.common().error_json;
    let env_workers = std::env::var(WORKERS_ENV).ok();
    let cfg = match cli.command.resolve(env_workers.as_deref()) {
        Ok(c) => c,
        Err(e) => return report_error(&e, json, stdout, stderr),
    };
    let _ = write!(
        stderr,
        "# effective config: sleepnet {}\n{}",
        cfg.command,
        cfg.to_toml()
    );
    let mut sink = Sink {
        out: cfg.out.as_deref(),
        stdout: &mut *stdout,
    };
    let result = match cfg.command {
        "analytic" => cmd_analytic(&cfg, &mut sink),
        "simulate" => cmd_simulate(&cfg, &mut sink),
        "validate" => cmd_validate(&cfg, &mut sink, &mut *stderr),
        _ => cmd_sweep(&cfg, &mut *stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(&e, json, stdout, stderr),
    }
}
