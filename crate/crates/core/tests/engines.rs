use sleepnet::analytic::{ch_gap_pdf, ch_gap_pdf_first_branch, energy_figures, Fidelity, ModelParams, Speed};
use sleepnet::experiments::{default_validation_grid, run_sweep, run_validation, Metric, Preset, ValidationOptions};
use sleepnet::numerics::{ks_critical_value, ks_statistic, Histogram, RunningStats};
use sleepnet::simulate::{
    estimate_energy, extract_clusters, min_window_length, sample_cycles, sample_snapshot, RngSpec,
};

fn canonical(rho: f64) -> ModelParams {
    ModelParams::canonical(rho).unwrap()
}

#[test]
fn snapshot_counts_are_poisson() {
    let p = canonical(0.01);
    let w = min_window_length(&p);
    let mut stats = RunningStats::new();
    for i in 0..2000 {
        stats.push(sample_snapshot(&p, w, &RngSpec::new(11, i)).unwrap().len() as f64);
    }
    let lambda = p.rho * w;
    let se = (lambda / 2000.0).sqrt();
    assert!((stats.mean() - lambda).abs() < 4.0 * se, "{} vs {lambda}", stats.mean());
    assert!((stats.variance() / lambda - 1.0).abs() < 0.15);
}

#[test]
fn snapshot_gaps_are_exponential() {
    let p = canonical(0.02);
    let snap = sample_snapshot(&p, 2.0e6, &RngSpec::new(5, 0)).unwrap();
    let gaps: Vec<f64> = snap.positions.windows(2).map(|w| w[1] - w[0]).collect();
    let d = ks_statistic(&gaps, |g| -(-p.rho * g).exp_m1());
    assert!(d < ks_critical_value(gaps.len(), 0.001), "D = {d}");
}

#[test]
fn head_fraction_matches_gap_tail() {
    for rho in [0.004, 0.01] {
        let p = canonical(rho);
        let snap = sample_snapshot(&p, 4.0e6, &RngSpec::new(9, 1)).unwrap();
        let clusters = extract_clusters(&snap, p.r0);
        let members: usize = clusters.clusters.iter().map(|c| c.member_count).sum();
        assert_eq!(members, snap.len());
        let frac = clusters.len() as f64 / snap.len() as f64;
        let want = (-p.rho_r0()).exp();
        let se = (want * (1.0 - want) / snap.len() as f64).sqrt();
        assert!((frac - want).abs() < 4.0 * se, "rho {rho}: {frac} vs {want}");
    }
}

#[test]
fn paper_cycles_follow_first_branch() {
    let p = canonical(0.005).with_fidelity(Fidelity::Paper);
    let n = 400_000;
    let samples = sample_cycles(&p, n, &RngSpec::new(21, 0), Fidelity::Paper);
    let mut h = Histogram::new(p.r0, 2.0 * p.r0, 20).unwrap();
    h.extend(samples.iter().map(|s| s.x));
    for (i, &c) in h.counts.iter().enumerate() {
        let (lo, hi) = (h.bin_lo(i), h.bin_lo(i) + h.bin_width);
        // Simpson over the bin; the branch is smooth inside [r0, 2 r0).
        let f = |x: f64| ch_gap_pdf_first_branch(x, &p);
        let mass = (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
        let mid = 0.5 * (lo + hi);
        assert!((f(mid) - ch_gap_pdf(mid, &p).unwrap()).abs() < 1e-12 * f(mid).max(1e-300));
        let expected = mass * n as f64;
        let z = (c as f64 - expected) / expected.sqrt();
        assert!(z.abs() < 4.5, "bin {i}: {c} vs {expected}");
    }
}

#[test]
fn energy_estimate_within_three_standard_errors() {
    for rho in [0.005, 0.02] {
        let p = canonical(rho);
        let samples = sample_cycles(&p, 1_000_000, &RngSpec::new(3, 0), Fidelity::Corrected);
        let est = estimate_energy(&samples, &p).unwrap();
        let exact = energy_figures(&p).unwrap();
        let z = |e: sleepnet::simulate::Estimate, a: f64| (e.value - a) / e.std_error;
        assert!(z(est.expected_gap, exact.expected_gap).abs() < 3.5);
        assert!(z(est.prob_sleep, exact.prob_sleep).abs() < 3.5);
        assert!(z(est.expected_power_saved, exact.expected_power_saved).abs() < 3.5);
    }
}

#[test]
fn degenerate_speed_cell() {
    let p = canonical(0.01).with_degenerate_speed(Speed::kmh(60.0)).unwrap();
    let samples = sample_cycles(&p, 300_000, &RngSpec::new(4, 0), Fidelity::Corrected);
    assert!(samples.iter().all(|s| (s.v - 60.0 / 3.6).abs() < 1e-6));
    let est = estimate_energy(&samples, &p).unwrap();
    let exact = energy_figures(&p).unwrap();
    let z = (est.expected_power_saved.value - exact.expected_power_saved) / est.expected_power_saved.std_error;
    assert!(z.abs() < 3.5, "z = {z}");
}

#[test]
fn matched_validation_beats_mismatched() {
    let grid = default_validation_grid(Fidelity::Corrected);
    let mut opts = ValidationOptions::new(100_000, 2);
    opts.fidelities = vec![Fidelity::Paper, Fidelity::Corrected];
    let matched = run_validation(&grid, &opts).unwrap();
    opts.mismatched = true;
    let mismatched = run_validation(&grid, &opts).unwrap();
    let passes = |r: &sleepnet::experiments::ValidationReport| r.rows.iter().filter(|r| r.pass).count();
    assert!(matched.passed());
    assert!(!mismatched.passed());
    assert!(passes(&matched) > passes(&mismatched));
}

#[test]
fn fig4_power_saved_has_interior_minimum() {
    let grids = Preset::Fig4.grids(Fidelity::Corrected);
    let table = run_sweep(&grids[0]);
    let saved: Vec<(f64, f64)> = table
        .rows_for(Metric::ExpectedPowerSaved.name())
        .map(|r| (r.rho, r.value.unwrap()))
        .collect();
    let (imin, _) = saved
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();
    assert!(imin > 0 && imin < saved.len() - 1);
    assert!(saved[..=imin].windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(saved[imin..].windows(2).all(|w| w[1].1 >= w[0].1));
    let clamped: Vec<f64> = table
        .rows_for(Metric::ExpectedPowerSavedClamped.name())
        .map(|r| r.value.unwrap())
        .collect();
    for ((_, s), c) in saved.iter().zip(&clamped) {
        assert!(c >= s);
    }
}

#[test]
fn coverage_shorter_than_range_always_sleeps() {
    let mut p = canonical(0.01).with_degenerate_speed(Speed::kmh(60.0)).unwrap();
    p.ec = 0.0;
    p.d = 100.0;
    let exact = energy_figures(&p).unwrap();
    assert!((exact.prob_sleep - 1.0).abs() < 1e-6, "{}", exact.prob_sleep);
    let samples = sample_cycles(&p, 200_000, &RngSpec::new(6, 0), Fidelity::Corrected);
    let est = estimate_energy(&samples, &p).unwrap();
    assert_eq!(est.prob_sleep.value, 1.0);
    assert_eq!(est.prob_sleep.std_error, 0.0);
    let z = (est.expected_power_saved.value - exact.expected_power_saved) / est.expected_power_saved.std_error;
    assert!(z.abs() < 3.5, "z = {z}");
}
