use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn weakval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Data rows of a sweep CSV as (x, pointer_mean_over_g) pairs, plus the comment row.
fn csv_rows(text: &str) -> (Vec<(f64, f64)>, String) {
    let mut lines = text.lines();
    lines.next().expect("header");
    let mut rows = Vec::new();
    let mut comment = String::new();
    for l in lines {
        if l.starts_with('#') {
            comment = l.to_string();
            continue;
        }
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 4);
        rows.push((cols[0], cols[2]));
    }
    (rows, comment)
}

fn comment_value(comment: &str) -> f64 {
    let after = comment.split(": ").nth(1).unwrap();
    after.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn run_simple_mzi_summary() {
    let o = weakval(&["run", "--builtin", "simple-mzi"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("analytic")).unwrap();
    assert!(
        line.starts_with("analytic 0.5, operational 0.5 ± "),
        "{line}"
    );
    assert!(line.ends_with(", WellBehaved"), "{line}");
    let residual: f64 = line
        .split("± ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-6);
}

#[test]
fn run_cheshire_sigma_z_r() {
    let o = weakval(&["run", "--builtin", "cheshire", "--observable", "sigma_z_R"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("analytic -1,"), "{out}");
    assert!(out.contains("DerailedAtInsertion"), "{out}");
}

#[test]
fn run_appendix_a_null_projection() {
    let o = weakval(&["run", "--builtin", "appendix-a"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("analytic 0,"), "{out}");
    assert!(out.contains("NullProjection"), "{out}");
    assert!(
        out.contains(weakval::analysis::NULL_PROJECTION_CAVEAT),
        "{out}"
    );
}

#[test]
fn run_report_is_reproducible_from_embedded_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = weakval(&[
        "run",
        "--builtin",
        "nested-mzi",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let first = std::fs::read_to_string(&path).unwrap();
    let report: Value = serde_json::from_str(&first).unwrap();

    assert_eq!(report["tool"]["version"], env!("CARGO_PKG_VERSION"));
    let scenario = weakval::scenarios::build_nested_mzi();
    assert_eq!(report["scenario"]["hash"], scenario.hash());
    assert_eq!(report["scenario"]["convention"], scenario.convention);
    assert_eq!(report["diagnostics"]["behavior"], "DerailedUnderEvolution");
    assert_eq!(report["analytic_weak_value"]["re"].as_f64().unwrap(), -0.5);
    assert_eq!(report["operational"]["points"].as_array().unwrap().len(), 8);
    assert_eq!(
        report["postselection_probabilities"]
            .as_array()
            .unwrap()
            .len(),
        8
    );

    let command: Vec<String> = report["command"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    std::fs::remove_file(&path).unwrap();
    let args: Vec<&str> = command[1..].iter().map(String::as_str).collect();
    assert_eq!(weakval(&args).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn dark_postselection_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let s = weakval::scenarios::build_simple_mzi();
    let dark = s.with_postselected(weakval::hilbert::StateVector::basis(&s.space, "L'").unwrap());
    let p = write_scenario(
        &dir,
        "dark.json",
        &weakval::scenarios::scenario_to_json(&dark),
    );
    let o = weakval(&["run", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("undefined"));

    let o = weakval(&["diagnose", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("class UndefinedPostselection"));

    let o = weakval(&[
        "sample",
        "--scenario",
        p.to_str().unwrap(),
        "--g",
        "0.1",
        "--runs",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn invalid_scenarios_exit_2_with_findings() {
    let dir = tempfile::tempdir().unwrap();
    let lossy = write_scenario(
        &dir,
        "lossy.json",
        r#"{
          "basis": ["a", "b"],
          "preselected": {"a": [1, 0]},
          "observable": {"projector_onto": {"a": [1, 0]}},
          "stages": [{"label": "lossy", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [1, 0]]]}],
          "postselected": {"a": [1, 0]},
          "meter": {"delta": 1.0}
        }"#,
    );
    let o = weakval(&["run", "--scenario", lossy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("stage not unitary: lossy"),
        "{}",
        stderr(&o)
    );

    let broken = write_scenario(&dir, "broken.json", "{ not json");
    assert_eq!(
        weakval(&["diagnose", "--scenario", broken.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        weakval(&["run", "--scenario", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(weakval(&["run"]).status.code(), Some(1));
    assert_eq!(
        weakval(&["run", "--builtin", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(
        weakval(&["run", "--builtin", "cheshire", "--observable", "nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        weakval(&["run", "--builtin", "simple-mzi", "--scenario", "x.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(weakval(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        weakval(&["run", "--builtin", "simple-mzi", "--count", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        weakval(&["run", "--builtin", "simple-mzi", "--ratio", "1.5"])
            .status
            .code(),
        Some(1)
    );
    let o = weakval(&[
        "sample",
        "--builtin",
        "simple-mzi",
        "--g",
        "0.05",
        "--runs",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        weakval(&[
            "sample",
            "--builtin",
            "simple-mzi",
            "--g",
            "0",
            "--runs",
            "5"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(weakval(&["--help"]).status.code(), Some(0));
    assert_eq!(weakval(&["--version"]).status.code(), Some(0));
}

#[test]
fn sweep_simple_mzi() {
    let o = weakval(&["sweep", "--builtin", "simple-mzi", "--count", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("g,pointer_mean,pointer_mean_over_g,postselection_probability\n"));
    let (rows, comment) = csv_rows(&out);
    assert_eq!(rows.len(), 8);
    let errors: Vec<f64> = rows.iter().map(|(_, y)| (y - 0.5).abs()).collect();
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{errors:?}");
    }
    assert!((comment_value(&comment) - 0.5).abs() < 1e-6, "{comment}");
}

#[test]
fn sweep_eigenstate_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        "eigen.json",
        r#"{
          "name": "eigenstate",
          "basis": ["a", "b"],
          "preselected": {"a": [1, 0]},
          "observable": {"name": "S", "matrix": [[[2, 0], [0, 0]], [[0, 0], [-1, 0]]]},
          "stages": [],
          "postselected": {"a": [0.6, 0], "b": [0, 0.8]},
          "meter": {"delta": 0.5}
        }"#,
    );
    let o = weakval(&["sweep", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (rows, comment) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 8);
    assert!((rows[0].0 - 0.05).abs() < 1e-15, "g_max defaults to 0.1 Δ");
    for (_, y) in rows {
        assert!((y - 2.0).abs() < 1e-12, "{y}");
    }
    assert!((comment_value(&comment) - 2.0).abs() < 1e-12);
}

#[test]
fn sweep_nested_delta_route() {
    let o = weakval(&[
        "sweep",
        "--builtin",
        "nested-mzi",
        "--delta-list",
        "1,2,4,8,16,32",
        "--g",
        "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("delta,"));
    let (rows, comment) = csv_rows(&out);
    assert_eq!(
        rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    );
    assert!((comment_value(&comment) + 0.5).abs() < 1e-6, "{comment}");

    let o = weakval(&["sweep", "--builtin", "nested-mzi", "--delta-list", "4,2,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let o = weakval(&[
        "sweep",
        "--builtin",
        "cheshire",
        "--observable",
        "sigma_z_R",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("extrapolated -1 ± "));
    let (rows, _) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 8);

    let json = dir.path().join("sweep.json");
    let o = weakval(&[
        "sweep",
        "--builtin",
        "simple-mzi",
        "--format",
        "json",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["estimate"]["route"], "coupling_to_zero");
}

#[test]
fn diagnose_nested_trace() {
    let o = weakval(&["diagnose", "--builtin", "nested-mzi"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let row = |stage: &str| -> Vec<String> {
        out.lines()
            .find(|l| l.trim_start().starts_with(stage))
            .unwrap_or_else(|| panic!("no row {stage} in {out}"))
            .split_whitespace()
            .map(str::to_string)
            .collect()
    };
    assert_eq!(row("insertion")[1..], ["0.25", "0.25"]);
    assert_eq!(row("after BS3")[2..], ["0.25", "0"]);
    assert_eq!(row("after BS4")[3], "0");
    assert!(out.contains("class DerailedUnderEvolution"));
}

#[test]
fn diagnose_simple_and_cheshire() {
    let out = stdout(&weakval(&["diagnose", "--builtin", "simple-mzi"]));
    assert!(out.contains("<in|S|in>    = 0.5\n"), "{out}");
    assert!(out.contains("class WellBehaved"));

    let out = stdout(&weakval(&[
        "diagnose",
        "--builtin",
        "cheshire",
        "--observable",
        "sigma_z_L",
    ]));
    assert!(out.contains("<in|S|in>    = 0\n"), "{out}");
    assert!(out.contains("class DerailedAtInsertion"));

    let out = stdout(&weakval(&["diagnose", "--builtin", "appendix-a"]));
    assert!(out.contains("class NullProjection"));
    assert!(out.contains("note: S|in> = 0"));

    let o = weakval(&["diagnose", "--builtin", "nested-mzi", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["diagnostics"]["trace"]["points"][1]["stage"], "BS3");
    assert_eq!(
        v["diagnostics"]["s_expectation"]["re"].as_f64().unwrap(),
        0.25
    );
}

#[test]
fn sample_simple_mzi_million_runs() {
    let args = [
        "sample",
        "--builtin",
        "simple-mzi",
        "--g",
        "0.05",
        "--runs",
        "1000000",
        "--seed",
        "42",
        "--format",
        "json",
    ];
    let a = weakval(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = weakval(&args);
    assert_eq!(a.stdout, b.stdout, "same command, same bytes");

    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 42);
    let mc = &v["monte_carlo"];
    let estimate = mc["estimate"].as_f64().unwrap();
    let stderr_ = mc["stderr"].as_f64().unwrap();
    assert!(
        (estimate - 0.5).abs() <= 3.0 * stderr_,
        "{estimate} ± {stderr_}"
    );
    assert_eq!(mc["n_runs"], 1_000_000);

    let text = stdout(&weakval(&[
        "sample",
        "--builtin",
        "simple-mzi",
        "--g",
        "0.05",
        "--runs",
        "1000",
        "--seed",
        "1",
    ]));
    assert!(text.contains("estimate "), "{text}");
    assert!(text.contains("accepted "), "{text}");
    assert!(text.contains("exact 0.5"), "{text}");
}

#[test]
fn in_process_entry_point() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = weakval::cli::run(
        [
            "weakval",
            "run",
            "--builtin",
            "simple-mzi",
            "--format",
            "json",
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    let v: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(
        v["command"],
        serde_json::json!([
            "weakval",
            "run",
            "--builtin",
            "simple-mzi",
            "--format",
            "json"
        ])
    );
    assert_eq!(v["scenario"]["name"], "simple-mzi");

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = weakval::cli::run(
        [
            "weakval",
            "run",
            "--builtin",
            "simple-mzi",
            "--format",
            "csv",
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    assert!(String::from_utf8(out)
        .unwrap()
        .starts_with("g,pointer_mean"));
}
