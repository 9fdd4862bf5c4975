//! End-to-end tests of the `semiclass` binary: exit codes, file formats, and
//! agreement between the subcommands' summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn semiclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiclass"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal expected")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Rows of a series CSV: (time, observable, numeric columns from `value` on).
type SeriesRows = Vec<(f64, String, Vec<f64>)>;

/// Parse a series CSV into its header plus data rows.
fn read_series(path: &Path) -> (Vec<String>, SeriesRows) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().expect("header").split(',').map(String::from).collect();
    let rows = lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), header.len(), "ragged row in {}", path.display());
            let time: f64 = fields[0].parse().unwrap();
            let values: Vec<f64> = fields[3..].iter().map(|f| f.parse().unwrap()).collect();
            (time, fields[1].to_string(), values)
        })
        .collect();
    (header, rows)
}

const HARMONIC_INI: &str = "\
[experiment]
name = quick
potential = harmonic
dim = 1
epsilons = 0.01
methods = husimi-corrected
observables = all
t_final = 1.0
record_dt = 0.25
seed = 42

[state]
center = 1.0, 0.5

[schedule eps=0.01]
n1 = 4096
n2 = 512
h1 = 0.01
h2 = 0.001
";

#[test]
fn simulate_tracks_the_exact_harmonic_center() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("quick.ini");
    // `output` belongs to [experiment], so splice it in after the seed.
    fs::write(
        &cfg,
        HARMONIC_INI.replace(
            "seed = 42",
            &format!("seed = 42\noutput = {}", dir.path().display()),
        ),
    )
    .unwrap();

    let out = semiclass(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let series = dir.path().join("quick-eps0.01-husimi-corrected.csv");
    let (header, rows) = read_series(&series);
    assert_eq!(header, ["time", "observable", "method", "value"]);
    let mut checked = 0;
    for (t, name, values) in rows {
        let exact = match name.as_str() {
            "q1" => t.cos() + 0.5 * t.sin(),
            "p1" => 0.5 * t.cos() - t.sin(),
            _ => continue,
        };
        assert!(
            (values[0] - exact).abs() < 1e-3,
            "{name}(t = {t}) = {} vs exact {exact}",
            values[0]
        );
        checked += 1;
    }
    assert_eq!(checked, 10, "five record times, two center observables");

    // The resolved config is echoed next to the outputs.
    assert!(dir.path().join("quick-config.ini").exists());
}

#[test]
fn equal_seeds_give_byte_identical_outputs() {
    let write_cfg = |dir: &Path| {
        let cfg = dir.join("run.ini");
        fs::write(
            &cfg,
            HARMONIC_INI.replace(
                "seed = 42",
                &format!("seed = 42\noutput = {}", dir.display()),
            ),
        )
        .unwrap();
        cfg
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = write_cfg(dir);
        let out = semiclass(&["simulate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    }
    let name = "quick-eps0.01-husimi-corrected.csv";
    let bytes_a = fs::read(a.path().join(name)).unwrap();
    let bytes_b = fs::read(b.path().join(name)).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must reproduce the same bytes");
}

#[test]
fn config_problems_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(
        &cfg,
        "[experiment]\npreset = harmonic-sanity\n\n[schedule eps=0.01]\nn3 = 7\n",
    )
    .unwrap();
    let out = semiclass(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let msg = stderr_text(&out);
    assert!(msg.contains("line 5") && msg.contains("n3"), "stderr: {msg}");

    let out = semiclass(&["simulate", "--config", "no-such-preset"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("harmonic-sanity"), "should list presets");
}

#[test]
fn runaway_trajectories_exit_with_code_3() {
    // A step size far past the integrator's linear stability limit makes
    // every trajectory grow exponentially until the trusted-range guard
    // drops it; the run must report instability, not quietly return junk.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("escape.ini");
    fs::write(
        &cfg,
        format!(
            "[experiment]\nname = escape\npotential = harmonic\ndim = 1\n\
             epsilons = 0.01\nmethods = husimi-naive\nobservables = all\n\
             t_final = 40.0\nrecord_dt = 5.0\noutput = {}\n\n\
             [state]\ncenter = 1.0, 0.0\n\n\
             [schedule eps=0.01]\nn1 = 8\nn2 = 2\nh1 = 5.0\nh2 = 0.5\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = semiclass(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_text(&out));
    assert!(stderr_text(&out).contains("instability"), "stderr: {}", stderr_text(&out));
}

#[test]
fn reference_writes_a_grid_table_and_a_readable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ref.ini");
    fs::write(
        &cfg,
        format!(
            "[experiment]\nname = refrun\npotential = harmonic\ndim = 1\n\
             epsilons = 0.05\nmethods = husimi-corrected\nobservables = all\n\
             t_final = 0.5\nrecord_dt = 0.25\noutput = {}\n\n\
             [state]\ncenter = 1.0, 0.5\n\n\
             [schedule eps=0.05]\nn1 = 64\nn2 = 16\nh1 = 0.01\nh2 = 0.005\n\n\
             [grid]\npoints = 128\nhalf_width = 4.0\nh = 0.0025\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = semiclass(&["reference", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let (header, rows) = read_series(&dir.path().join("refrun-eps0.05-grid.csv"));
    assert_eq!(header, ["time", "observable", "method", "value"]);
    // 3 record times × 5 observables (q1, p1, kinetic, potential, total).
    assert_eq!(rows.len(), 15);
    let q_half = rows
        .iter()
        .find(|(t, name, _)| (*t - 0.5).abs() < 1e-12 && name == "q1")
        .expect("q1 at t = 0.5")
        .2[0];
    let exact = 0.5f64.cos() + 0.5 * 0.5f64.sin();
    assert!((q_half - exact).abs() < 1e-6, "grid q1(0.5) = {q_half} vs {exact}");

    let ckpt = dir.path().join("refrun-eps0.05.ckpt");
    let state = semiclass::prelude::read_checkpoint(fs::File::open(&ckpt).unwrap()).unwrap();
    assert!((state.time - 0.5).abs() < 1e-12);
    // The discretized Gaussian carries an O(1e-8) quadrature defect at 128
    // points; the propagator preserves whatever norm it starts with.
    assert!((state.norm_sq() - 1.0).abs() < 1e-6, "norm² = {}", state.norm_sq());
}

#[test]
fn converge_fits_synthetic_power_law_tables() {
    let dir = tempfile::tempdir().unwrap();
    for &eps in &[0.1f64, 0.05, 0.025] {
        let mut text = String::from("time,observable,method,value,reference,error\n");
        for step in 0..3 {
            let t = step as f64 * 0.5;
            // Constant per-file error 0.7·ε² makes the fitted slope exactly 2.
            let err = 0.7 * eps * eps;
            text.push_str(&format!(
                "{t:.16e},q1,husimi-corrected,0.0e0,0.0e0,{err:.16e}\n"
            ));
        }
        fs::write(dir.path().join(format!("syn-eps{eps}-husimi-corrected.csv")), text).unwrap();
    }
    let summary = dir.path().join("summary.csv");
    let pattern = format!("{}/syn-eps0.*", dir.path().display());
    let out = semiclass(&["converge", "--inputs", &pattern, "--output", summary.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let text = fs::read_to_string(&summary).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,epsilon,mean_error,slope"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row[0], "husimi-corrected");
        let slope: f64 = row[3].parse().unwrap();
        assert!((slope - 2.0).abs() < 1e-9, "slope = {slope}");
    }

    // Two ε values are not enough for a fit.
    let narrow = format!("{}/syn-eps0.0*", dir.path().display());
    let out = semiclass(&["converge", "--inputs", &narrow, "--output", summary.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("at least 3"), "stderr: {}", stderr_text(&out));
}

#[test]
fn simulate_with_grid_reference_agrees_with_converge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("torsional.ini");
    fs::write(
        &cfg,
        format!(
            "[experiment]\nname = tor\npotential = torsional\ndim = 2\n\
             epsilons = 0.1, 0.05, 0.025\nmethods = husimi-corrected\nobservables = all\n\
             t_final = 0.5\nrecord_dt = 0.25\nseed = 7\noutput = {}\n\n\
             [state]\ncenter = 1.0, 0.0, 0.0, 0.0\n\n\
             [schedule eps=0.1]\nn1 = 2048\nn2 = 256\nh1 = 0.01\nh2 = 0.005\n\n\
             [schedule eps=0.05]\nn1 = 2048\nn2 = 256\nh1 = 0.01\nh2 = 0.005\n\n\
             [schedule eps=0.025]\nn1 = 2048\nn2 = 256\nh1 = 0.01\nh2 = 0.005\n\n\
             [grid]\npoints = 128\nhalf_width = 3.0\nh = 0.0025\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = semiclass(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    // Error columns are present and small for the corrected method.
    let (header, rows) = read_series(&dir.path().join("tor-eps0.025-husimi-corrected.csv"));
    assert_eq!(header, ["time", "observable", "method", "value", "reference", "error"]);
    for (t, name, values) in &rows {
        let (value, reference, error) = (values[0], values[1], values[2]);
        assert!((error - (value - reference).abs()).abs() < 1e-15);
        assert!(error < 1e-2, "{name}(t = {t}) error {error} too large");
    }

    // `converge` over the written tables reproduces the built-in summary.
    let recomputed = dir.path().join("recomputed.csv");
    let pattern = format!("{}/tor-eps*-husimi-corrected.csv", dir.path().display());
    let out = semiclass(&["converge", "--inputs", &pattern, "--output", recomputed.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let parse_summary = |path: &Path| -> BTreeMap<String, (f64, f64)> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                (
                    format!("{},{}", f[0], f[1]),
                    (f[2].parse().unwrap(), f[3].parse().unwrap()),
                )
            })
            .collect()
    };
    let built_in = parse_summary(&dir.path().join("tor-convergence.csv"));
    let external = parse_summary(&recomputed);
    assert_eq!(built_in.len(), 3);
    assert_eq!(built_in.keys().collect::<Vec<_>>(), external.keys().collect::<Vec<_>>());
    for (key, (mean, slope)) in &built_in {
        let (mean2, slope2) = external[key];
        assert!((mean - mean2).abs() <= 1e-12 * mean.abs(), "{key}: {mean} vs {mean2}");
        assert!((slope - slope2).abs() <= 1e-9, "{key}: {slope} vs {slope2}");
    }
}

#[test]
fn preset_names_resolve_without_a_file() {
    // Overridden down to a few seconds of work; exercises the preset path.
    let dir = tempfile::tempdir().unwrap();
    let out = semiclass(&[
        "simulate",
        "--config",
        "harmonic-sanity",
        "--t-final",
        "0.5",
        "--n1",
        "1024",
        "--n2",
        "128",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let (header, rows) = read_series(&dir.path().join("harmonic-sanity-eps0.01-husimi-corrected.csv"));
    assert_eq!(header.len(), 6, "preset carries a grid, so error columns appear");
    assert!(!rows.is_empty());
}
