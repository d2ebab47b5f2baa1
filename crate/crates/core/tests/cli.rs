use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psbfem::io::parse_vtk;

fn cases() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn psbfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psbfem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_summary_monitors_and_a_readable_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let case = cases().join("patch.json");
    let expect = cases().join("patch.expected.json");
    let out = psbfem(&[
        "run",
        s(&case),
        "--out",
        s(dir.path()),
        "--expect",
        s(&expect),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS reference.max_relative_error"));
    for f in ["summary.json", "timings.json", "checks.json", "field.vtk"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["mesh"]["elements"], 5);
    let grid = parse_vtk(&std::fs::read_to_string(dir.path().join("field.vtk")).unwrap()).unwrap();
    assert_eq!(grid.cells.len(), 5);
    let head = &grid.point_data["head"];
    assert_eq!(head.len(), grid.points.len());
    assert!(head
        .iter()
        .all(|&h| (30.0 - 1e-6..=70.0 + 1e-6).contains(&h)));
}

#[test]
fn failed_expectation_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let expect = dir.path().join("strict.json");
    std::fs::write(
        &expect,
        r#"{"checks": [{"metric": "reference.max_relative_error", "max": 1e-30}]}"#,
    )
    .unwrap();
    let case = cases().join("patch.json");
    let out = psbfem(&[
        "run",
        s(&case),
        "--out",
        s(&dir.path().join("o")),
        "--expect",
        s(&expect),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL reference.max_relative_error"));
}

#[test]
fn malformed_case_exits_with_2_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("bad.json");
    std::fs::write(
        &case,
        "{\n  \"name\": \"bad\",\n  \"mesh\": {\"generator\": \"nope\"}\n}\n",
    )
    .unwrap();
    let out = psbfem(&["run", s(&case), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_node_set_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("c.json");
    std::fs::write(
        &case,
        r#"{"name": "c", "mesh": {"generator": "patch"}, "materials": [{"name": "m", "k": 1.0}],
            "boundary": {"dirichlet": [{"node_set": "missing", "head": 1.0}]}, "analysis": {"kind": "steady"}}"#,
    )
    .unwrap();
    let out = psbfem(&["run", s(&case), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn export_then_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("patch.json");
    let case = cases().join("patch.json");
    let out = psbfem(&["export", s(&case), "--out", s(&mesh), "--format", "json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = psbfem(&["validate-mesh", s(&mesh)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));
}

#[test]
fn oracle_check_on_a_small_corpus() {
    let out = psbfem(&["oracle-check", "--seed", "5", "--count", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r["failures"].as_array().unwrap().is_empty()));
}

#[test]
fn convergence_over_time_steps_prints_a_table() {
    let case = cases().join("column_transient.json");
    let out = psbfem(&["convergence", s(&case), "--dts", "10,5"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("dt,elements,max_relative_error"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let case = cases().join("inclusion.json");
    for o in ["a", "b"] {
        let out = psbfem(&["run", s(&case), "--out", s(&dir.path().join(o))]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["summary.json", "monitors.csv", "monitor_b.csv", "field.vtk"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}
