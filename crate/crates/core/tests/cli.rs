use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sleepnet::analytic::{energy_figures, ModelParams};
use sleepnet::experiments::{parse_json, SCHEMA_VERSION};

fn sleepnet(args: &[&str]) -> Output {
    sleepnet_env(args, &[])
}

fn sleepnet_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sleepnet"));
    cmd.args(args).env_remove("SLEEPNET_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// `metric -> (value, stderr)` from a one-cell CSV table.
fn csv_metrics(text: &str) -> Vec<(String, Option<f64>, Option<f64>)> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("rho,r0,D,a,b,P0,Ec,fidelity,metric,value,stderr,status")
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 12, "{l}");
            (f[8].to_string(), f[9].parse().ok(), f[10].parse().ok())
        })
        .collect()
}

fn metric(rows: &[(String, Option<f64>, Option<f64>)], name: &str) -> (f64, Option<f64>) {
    let r = rows.iter().find(|r| r.0 == name).unwrap_or_else(|| panic!("no {name}"));
    (r.1.expect("value present"), r.2)
}

#[test]
fn analytic_values_are_finite_and_bounded() {
    let o = sleepnet(&["analytic", "--rho", "0.01", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_metrics(&stdout(&o));
    assert_eq!(rows.len(), 6);
    for (name, v, _) in &rows {
        assert!(v.unwrap().is_finite(), "{name}");
    }
    let (p, _) = metric(&rows, "E_Psave");
    assert!((0.0..=1000.0).contains(&p));
    let expected = energy_figures(&ModelParams::canonical(0.01).unwrap()).unwrap();
    assert_eq!(p, expected.expected_power_saved);
}

#[test]
fn missing_rho_is_a_config_error() {
    let o = sleepnet(&["analytic"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"));
}

#[test]
fn error_json_reports_kind_and_code() {
    let o = sleepnet(&["analytic", "--error-json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["error"]["kind"], "config");
    assert_eq!(v["error"]["code"], 2);
    assert!(v["error"]["message"].as_str().unwrap().contains("rho"));
}

#[test]
fn fidelities_differ() {
    let run = |f: &str| {
        let o = sleepnet(&["analytic", "--rho", "0.005", "--fidelity", f, "--format", "csv"]);
        assert!(o.status.success());
        metric(&csv_metrics(&stdout(&o)), "E_X").0
    };
    let paper = run("paper");
    let corrected = run("corrected");
    assert!((paper - corrected).abs() / corrected > 1e-3);
}

#[test]
fn bare_speeds_are_rejected() {
    let o = sleepnet(&["analytic", "--rho", "0.01", "--a", "40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unit"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "rho = 0.01\nb = 80\n").unwrap();
    let o = sleepnet(&["analytic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "rho = 0.01\nrange = 200\n").unwrap();
    let o = sleepnet(&["analytic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "rho = 0.01\nr0 = 100.0\na = \"50kmh\"\nb = \"25mps\"\n").unwrap();
    let path = cfg.to_str().unwrap();
    let from_file = sleepnet(&["analytic", "--config", path, "--format", "csv"]);
    let overridden = sleepnet(&["analytic", "--config", path, "--r0", "200", "--format", "csv"]);
    assert!(from_file.status.success() && overridden.status.success());
    let line = |o: &Output| stdout(o).lines().nth(1).unwrap().to_string();
    assert!(line(&from_file).starts_with("0.01,100,800,13.88888888888889,25,"));
    assert!(line(&overridden).starts_with("0.01,200,800,"));
    assert!(stderr(&overridden).contains("r0 = 200.0"));
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--rho", "0.01", "--seed", "7", "--n", "20000", "--format", "json",
    ];
    let a = sleepnet(&args);
    let b = sleepnet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = sleepnet(&[
        "simulate", "--rho", "0.01", "--seed", "8", "--n", "20000", "--format", "json",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn cycles_mode_matches_analytic() {
    let o = sleepnet(&["simulate", "--rho", "0.01", "--n", "200000", "--format", "csv"]);
    assert!(o.status.success());
    let rows = csv_metrics(&stdout(&o));
    let (est, se) = metric(&rows, "E_Psave");
    let exact = energy_figures(&ModelParams::canonical(0.01).unwrap())
        .unwrap()
        .expected_power_saved;
    let z = (est - exact) / se.unwrap();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn timeline_common_output() {
    let o = sleepnet(&[
        "simulate",
        "--rho",
        "0.01",
        "--mode",
        "timeline-common",
        "--duration",
        "5000",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = parse_json(&stdout(&o)).unwrap();
    let frac = table.rows_for("sleep_fraction").next().unwrap().value.unwrap();
    assert!((0.0..=1.0).contains(&frac));
    let dur = table.rows_for("sim_duration").next().unwrap().value.unwrap();
    assert_eq!(dur, 5000.0);
}

#[test]
fn validate_passes_and_writes_json() {
    let o = sleepnet(&["validate", "--n", "20000", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], SCHEMA_VERSION);
    assert_eq!(v["meta"]["kind"], "validation");
    assert_eq!(v["meta"]["passed"], true);
    assert!(stderr(&o).contains("validation: 27/27"));
}

#[test]
fn mismatched_validation_fails() {
    let o = sleepnet(&["validate", "--n", "100000", "--mismatched"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL"));
}

fn sweep_into(dir: &Path, extra: &[&str], env: &[(&str, &str)]) -> String {
    let mut args = vec!["sweep", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = sleepnet_env(&args, env);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

#[test]
fn fig5_sweep_contents() {
    let dir = tempfile::tempdir().unwrap();
    sweep_into(dir.path(), &["--preset", "fig5"], &[]);
    let text = fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 19 * 2);
    let value = |m: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[8] == m)
            .map(|r| r[9].parse().unwrap())
            .collect()
    };
    let relay = value("E_Psave");
    let base = value("baseline_Psave");
    assert_eq!(relay.len(), 19);
    for (r, b) in relay.iter().zip(&base) {
        assert!(r > b);
    }
}

#[test]
fn fig3_sleep_time_grows_with_range() {
    let dir = tempfile::tempdir().unwrap();
    sweep_into(dir.path(), &["--preset", "fig3", "--format", "json"], &[]);
    let table = parse_json(&fs::read_to_string(dir.path().join("fig3.json")).unwrap()).unwrap();
    for rho in [0.005, 0.01, 0.02] {
        let t: Vec<f64> = table
            .rows_for("E_Toff")
            .filter(|r| r.rho == rho)
            .map(|r| r.value.unwrap())
            .collect();
        assert_eq!(t.len(), 16);
        assert!(t.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "rho {rho}: {t:?}");
        assert!(t[15] > 2.0 * t[0]);
    }
}

#[test]
fn single_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let printed = sweep_into(dir.path(), &["--rho", "0.01", "--metrics", "E_Psave"], &[]);
    assert!(printed.contains("custom.csv"));
    let text = fs::read_to_string(dir.path().join("custom.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains(",E_Psave,"));
}

#[test]
fn worker_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sweep_into(a.path(), &["--preset", "fig4"], &[("SLEEPNET_WORKERS", "1")]);
    sweep_into(b.path(), &["--preset", "fig4", "--workers", "3"], &[]);
    assert_eq!(
        fs::read(a.path().join("fig4.csv")).unwrap(),
        fs::read(b.path().join("fig4.csv")).unwrap()
    );
    let o = sleepnet_env(&["sweep", "--preset", "fig4"], &[("SLEEPNET_WORKERS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn echoed_config_reproduces_run() {
    let args = [
        "simulate", "--rho", "0.02", "--r0", "150", "--seed", "3", "--n", "5000", "--format", "csv",
    ];
    let first = sleepnet(&args);
    assert!(first.status.success());
    let echo: String = stderr(&first)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("echo.toml");
    fs::write(&cfg, echo).unwrap();
    let again = sleepnet(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(first.stdout, again.stdout);
}
