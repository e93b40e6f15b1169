//! End-to-end checks of the binary contract: exit codes, output layout,
//! determinism of the emitted JSON.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn zonewave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonewave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("zonewave-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn examples_lists_every_family() {
    let out = zonewave(&["examples"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    for name in ["ex31", "ex32", "ex33", "ex34", "ex35", "custom"] {
        assert!(text.contains(name), "missing family {name}:\n{text}");
    }
}

#[test]
fn check_ex31_passes_all_conditions() {
    let out = zonewave(&["check", &fixture("ex31.json"), "--horizon", "1e6"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).expect("valid JSON");
    let flags = &report["body"]["pass_flags"];
    for name in [
        "shape",
        "zero_mean",
        "stabilisation",
        "derivative_growth",
        "compatibility",
        "jet_consistency",
    ] {
        assert_eq!(flags[name], true, "{name} should pass for ex31");
    }
    // provenance: config echo, version, seed
    assert_eq!(report["config"]["family"], "ex31");
    assert_eq!(report["config"]["m"], 1);
    assert_eq!(report["seed"], 0);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn check_ex32_fails_growth_and_compatibility_only() {
    let out = zonewave(&["check", &fixture("ex32.json"), "--horizon", "1e6"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).expect("valid JSON");
    let flags = &report["body"]["pass_flags"];
    assert_eq!(flags["shape"], true);
    assert_eq!(flags["zero_mean"], true);
    assert_eq!(flags["stabilisation"], true);
    assert_eq!(flags["derivative_growth"], false);
    assert_eq!(flags["compatibility"], false);
}

#[test]
fn identical_config_and_seed_give_byte_identical_json() {
    let args = [
        "solve",
        &fixture("ex31.json"),
        "--xi",
        "2.5",
        "--t",
        "150",
        "--seed",
        "7",
    ];
    let first = zonewave(&args);
    let second = zonewave(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "stdout must be reproducible");
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&first)).unwrap();
    assert_eq!(report["seed"], 7);
}

#[test]
fn zones_prints_a_csv_table() {
    let out = zonewave(&[
        "zones",
        &fixture("ex31.json"),
        "--xi-grid",
        "log:1e-3:1e2:11",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi,t1,t2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for pair in rows.windows(2) {
        assert!(pair[0][0] < pair[1][0], "xi column must increase");
    }
    for row in &rows {
        assert!(row[1] <= row[2], "t1 <= t2 in every row");
    }
    // low frequencies stay dissipative for a while; high ones never do
    assert!(rows[0][1] > 0.0);
    assert_eq!(rows[10][1], 0.0);
}

#[test]
fn solve_writes_report_and_csv_under_out() {
    let dir = tmp_dir("solve-out");
    let out = zonewave(&[
        "solve",
        &fixture("ex31.json"),
        "--xi",
        "1",
        "--t",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));

    let json_path = dir.join("solve.json");
    let csv_path = dir.join("solve_matrix.csv");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).expect("solve.json written"))
            .unwrap();
    // the file carries the same report as stdout
    assert_eq!(
        std::fs::read_to_string(&json_path).unwrap(),
        stdout_str(&out)
    );
    assert_eq!(report["body"]["variant"], "full");
    assert!(report["body"]["det_residual"].as_f64().unwrap() < 1e-6);

    let csv = std::fs::read_to_string(&csv_path).expect("solve_matrix.csv written");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("a11_re,a11_im,a12_re,a12_im,a21_re,a21_im,a22_re,a22_im")
    );
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row.len(), 8);
    let matrix: Vec<f64> = report["body"]["matrix"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(row, matrix, "CSV row equals the JSON matrix");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn solve_variants_differ_where_they_should() {
    let base = [
        "solve",
        &fixture("ex31.json"),
        "--xi",
        "0.8",
        "--t",
        "40",
    ];
    let full = zonewave(&base);
    let free = zonewave(&[&base[..], &["--free"]].concat());
    let shape = zonewave(&[&base[..], &["--sigma-off"]].concat());
    for out in [&full, &free, &shape] {
        assert_eq!(out.status.code(), Some(0));
    }
    let norm = |out: &Output| -> f64 {
        serde_json::from_str::<serde_json::Value>(&stdout_str(out)).unwrap()["body"]["norm"]
            .as_f64()
            .unwrap()
    };
    assert!((norm(&free) - 1.0).abs() < 1e-9, "free flow is unitary");
    assert!(norm(&full) < 1.0, "dissipation contracts the full flow");
    assert!(norm(&shape) < 1.0);
    assert_ne!(norm(&full), norm(&shape));
}

#[test]
fn diagonalize_reconstruction_matches_direct_solve() {
    let out = zonewave(&[
        "diagonalize",
        &fixture("ex31.json"),
        "--xi",
        "1",
        "--s",
        "auto",
        "--t",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(report["body"]["rel_residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["body"]["pass"], true);
    assert!(stderr_str(&out).contains("PASS"));
}

#[test]
fn verify_and_mode_limit_pass_on_ex31() {
    let sharp = zonewave(&[
        "verify-sharpness",
        &fixture("ex31.json"),
        "--xi",
        "1",
        "--v0",
        "1,0",
        "--t-grid",
        "log:10:1e3:9",
    ]);
    assert_eq!(sharp.status.code(), Some(0), "{}", stderr_str(&sharp));

    let ml = zonewave(&["mode-limit", &fixture("ex31.json"), "--xi", "1"]);
    assert_eq!(ml.status.code(), Some(0), "{}", stderr_str(&ml));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&ml)).unwrap();
    assert!(report["body"]["report"]["pass_flags"]["doubling_factor_in_1_to_4"]["passed"]
        .as_bool()
        .unwrap());
}

#[test]
fn config_and_usage_errors_exit_2() {
    // missing file
    let out = zonewave(&["check", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("cannot read"));

    // malformed JSON
    let out = zonewave(&["check", &fixture("malformed.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("malformed"));

    // bad grid spec
    let out = zonewave(&[
        "zones",
        &fixture("ex31.json"),
        "--xi-grid",
        "log:5:1:10",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // missing required argument
    let out = zonewave(&["solve", &fixture("ex31.json"), "--xi", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // off-zone diagonalization start
    let out = zonewave(&[
        "diagonalize",
        &fixture("ex31.json"),
        "--xi",
        "1",
        "--s",
        "0.5",
        "--t",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("hyperbolic"));

    // help exits 0
    let out = zonewave(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(env!("CARGO_BIN_EXE_zonewave")).exists());
}
