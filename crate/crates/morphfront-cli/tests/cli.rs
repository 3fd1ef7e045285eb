//! End-to-end runs of the installed binary: exit codes, output tables and
//! the strictness of config handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const P1: &str = r#"{
    "D_e": 0.3, "D_d": 1.5, "r_e": 1.1, "r_d": 0.2,
    "m_ee": 0.8333333333333334, "m_dd": 1.0, "m_ed": 0.8, "m_de": 0.7,
    "mu": 1.0, "e": 0.001, "d": 0.00025
}"#;

const P2: &str = r#"{
    "D_e": 0.3, "D_d": 1.5, "r_e": 1.1, "r_d": 0.2,
    "m_ee": 1.0, "m_dd": 1.0, "m_ed": 0.1, "m_de": 0.1,
    "mu": 1.0, "e": 0.001, "d": 0.00025
}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_morphfront"))
        .args(args)
        .output()
        .expect("binary should spawn");
    Run {
        code: status.code().expect("binary should not die on a signal"),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("params.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn speed_prints_the_minimised_speed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(
        out.stdout.contains("1.529821700"),
        "unexpected speed line: {}",
        out.stdout
    );
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["--version"]).code, 0);
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = run(&["speed"]);
    assert_eq!(out.code, 1);
    assert!(
        out.stderr.contains("--config is required"),
        "{}",
        out.stderr
    );
}

#[test]
fn unknown_config_key_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &P1.replace("\"D_e\"", "\"D_x\""));
    let out = run(&["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("D_x"), "{}", out.stderr);
}

#[test]
fn nonpositive_parameter_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &P1.replace("\"D_e\": 0.3", "\"D_e\": -0.3"));
    let out = run(&["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(
        out.stderr.contains("`D_e`") && out.stderr.contains("-0.3"),
        "{}",
        out.stderr
    );
}

#[test]
fn mutation_must_come_in_exactly_one_form() {
    let dir = tempfile::tempdir().unwrap();
    let both = config(
        dir.path(),
        &P1.replace(
            "\"mu\": 1.0",
            "\"mu\": 1.0, \"mu_e\": 0.001, \"mu_d\": 0.00025",
        ),
    );
    let out = run(&["speed", "--config", both.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("either"), "{}", out.stderr);

    let neither = config(
        dir.path(),
        &P1.replace(
            "\"mu\": 1.0, \"e\": 0.001, \"d\": 0.00025",
            "\"mu_e\": 0.001",
        ),
    );
    let out = run(&["speed", "--config", neither.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("either"), "{}", out.stderr);
}

#[test]
fn explicit_rate_pair_matches_the_triple_form() {
    let dir = tempfile::tempdir().unwrap();
    let pair = config(
        dir.path(),
        &P1.replace(
            "\"mu\": 1.0, \"e\": 0.001, \"d\": 0.00025",
            "\"mu_e\": 0.001, \"mu_d\": 0.00025",
        ),
    );
    let out = run(&["speed", "--config", pair.to_str().unwrap()]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("1.529821700"), "{}", out.stdout);
}

#[test]
fn classify_rejects_parameters_outside_its_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    // Swapped growth rates: the disperser would grow faster.
    let cfg = config(
        dir.path(),
        &P1.replace("\"r_e\": 1.1, \"r_d\": 0.2", "\"r_e\": 0.2, \"r_d\": 1.1"),
    );
    let out = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 1, "stderr: {}", out.stderr);
}

#[test]
fn conditions_reports_failures_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&["conditions", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("intersmall  FAIL"), "{}", out.stdout);
    assert!(out.stdout.contains("not satisfied"), "{}", out.stdout);
}

#[test]
fn equilibria_reports_the_lower_state_only_when_available() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&["equilibria", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(
        out.stdout.contains("k- unavailable") && out.stdout.contains("intersmall"),
        "{}",
        out.stdout
    );

    let cfg = config(dir.path(), P2);
    let out = run(&["equilibria", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("k- = (0.8218640"), "{}", out.stdout);
}

#[test]
fn mu_curve_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out1 = dir.path().join("one");
    let out4 = dir.path().join("four");
    for (jobs, out) in [("1", &out1), ("4", &out4)] {
        let run = run(&[
            "mu-curve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--points",
            "9",
            "--mu-min",
            "1e-4",
            "--mu-max",
            "1.0",
            "--jobs",
            jobs,
        ]);
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    }
    let csv1 = read(&out1.join("mu_curve.csv"));
    let csv4 = read(&out4.join("mu_curve.csv"));
    assert_eq!(csv1, csv4);
    assert!(
        csv1.starts_with("mu,eta,beta,q_ratio,eta_prime,beta_prime\n"),
        "{}",
        csv1.lines().next().unwrap_or_default()
    );
    assert_eq!(csv1.lines().count(), 10);
    // Endpoints land exactly on the requested magnitudes.
    assert!(csv1.contains("\n0.0001,"), "{csv1}");
    assert!(csv1.contains("\n1,"), "{csv1}");
}

#[test]
fn sweep_covers_the_grid_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out1 = dir.path().join("one");
    let out4 = dir.path().join("four");
    for (jobs, out) in [("1", &out1), ("4", &out4)] {
        let run = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "7",
            "--jobs",
            jobs,
        ]);
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    }
    for name in ["sweep_regime.csv", "sweep_composition.csv"] {
        assert_eq!(read(&out1.join(name)), read(&out4.join(name)), "{name}");
    }

    let regime = read(&out1.join("sweep_regime.csv"));
    let mut lines = regime.lines();
    assert_eq!(lines.next(), Some("r_ratio,D_ratio,regime,v_limit"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 49);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4, "{row}");
        assert!(
            ["anomalous", "establisher", "disperser"].contains(&fields[2]),
            "{row}"
        );
        let v: f64 = fields[3].parse().unwrap();
        assert!(v > 0.0, "{row}");
    }

    // The composition table mirrors the regime table row for row: a ratio
    // inside the anomalous zone, an empty cell outside it.
    let composition = read(&out1.join("sweep_composition.csv"));
    let mut lines = composition.lines();
    assert_eq!(lines.next(), Some("r_ratio,D_ratio,q_ratio"));
    let comp_rows: Vec<&str> = lines.collect();
    assert_eq!(comp_rows.len(), 49);
    for (regime_row, comp_row) in rows.iter().zip(&comp_rows) {
        let anomalous = regime_row.split(',').nth(2) == Some("anomalous");
        let cell = comp_row.split(',').nth(2).unwrap_or_default();
        assert_eq!(!cell.is_empty(), anomalous, "{regime_row} vs {comp_row}");
        assert_eq!(
            comp_row.rsplit_once(',').unwrap().0,
            regime_row
                .splitn(3, ',')
                .take(2)
                .collect::<Vec<_>>()
                .join(","),
            "row keys diverge"
        );
    }
}

#[test]
fn simulate_writes_the_trace_and_profile_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--length",
        "60",
        "--nx",
        "601",
        "--t-end",
        "10",
        "--x0",
        "15",
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(
        out.stdout.contains("invariant region respected"),
        "{}",
        out.stdout
    );

    let trace = read(&dir.path().join("trace.csv"));
    assert!(trace.starts_with("t,x_front\n"));
    assert!(trace.lines().count() > 50, "trace too sparse:\n{trace}");

    let profile = read(&dir.path().join("profile.csv"));
    assert!(profile.starts_with("x,n_e,n_d\n"));
    assert_eq!(profile.lines().count(), 602);
    let last = profile.lines().last().unwrap();
    assert!(last.starts_with("60,"), "{last}");
}

#[test]
fn verify_is_inconclusive_when_the_front_hits_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--length",
        "80",
        "--nx",
        "801",
        "--t-end",
        "60",
        "--x0",
        "20",
    ]);
    assert_eq!(
        out.code, 3,
        "stdout: {}\nstderr: {}",
        out.stdout, out.stderr
    );
    assert!(out.stdout.contains("INCONCLUSIVE"), "{}", out.stdout);
}

#[test]
fn verify_passes_at_measurement_scale_and_fails_a_tight_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let sim = [
        "--config",
        cfg.to_str().unwrap(),
        "--nx",
        "2001",
        "--t-end",
        "150",
    ];

    let mut pass = vec!["verify"];
    pass.extend_from_slice(&sim);
    let out = run(&pass);
    assert_eq!(
        out.code, 0,
        "stdout: {}\nstderr: {}",
        out.stdout, out.stderr
    );
    assert!(out.stdout.contains("PASS"), "{}", out.stdout);

    // The same measurement read against an unmeetable tolerance: the residual
    // discretisation error is around a quarter of a percent.
    let mut tight = pass.clone();
    tight.extend_from_slice(&["--tolerance", "0.0001"]);
    let out = run(&tight);
    assert_eq!(
        out.code, 2,
        "stdout: {}\nstderr: {}",
        out.stdout, out.stderr
    );
    assert!(out.stdout.contains("FAIL"), "{}", out.stdout);
}

#[test]
fn bad_boundary_name_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--boundary",
        "absorbing",
    ]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("absorbing"), "{}", out.stderr);
}

#[test]
fn json_output_is_parseable_and_carries_the_key_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), P1);
    let out = run(&["limits", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let value: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let beta_star = value["beta_star"].as_f64().unwrap();
    assert!(
        (beta_star - 0.8660254037844386).abs() < 1e-12,
        "{beta_star}"
    );
    assert!(value["q_ratio"].as_f64().unwrap() > 1.9);
}
