use std::path::PathBuf;
use std::process::Command;

use coupling_cli::report::Verdict;
use coupling_cli::{list_examples, run_file};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn coupling() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coupling"))
}

#[test]
fn hopf_check_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = coupling().arg("check").arg(scenario("hopf-coupling-check.json")).arg("-o").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    let checks = report["checks"].as_array().unwrap();
    for name in ["vertical-poisson", "parallel-poisson", "horizontal-closed", "curvature-identity"] {
        let c = checks.iter().find(|c| c["name"] == name).unwrap();
        assert!(c["residual"].as_f64().unwrap() < 1e-8);
        assert_eq!(c["tolerance"].as_f64().unwrap(), 1e-8);
    }
    for key in ["scenario", "grid", "seed", "tool_version", "wall_ms"] {
        assert!(report.get(key).is_some(), "{key}");
    }
}

#[test]
fn quadratic_moment_is_non_integrable_with_exit_one() {
    let out = coupling().arg("check").arg(scenario("so3-quadratic.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let verdict = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "integrability").unwrap();
    assert_eq!(verdict["verdict"], "NON-INTEGRABLE");
}

#[test]
fn malformed_file_exits_two_with_position() {
    let out = coupling().arg("check").arg(scenario("malformed.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in [
        r#"{"name": "a", "kind": "coupling-check", "inputs": {"example": "nope"}}"#,
        r#"{"name": "a", "kind": "coupling-check", "inputs": {"example": "hopf", "f": "x +* 2"}}"#,
        r#"{"name": "a", "kind": "so3-integrability", "inputs": {"f": "2*r", "radii": [1.0], "exact_slope": "2/0"}}"#,
        r#"{"name": "a", "kind": "transgress", "inputs": {"bundle": "hopf", "x0": [0.5], "families": [{"family": "torus"}]}}"#,
        r#"{"name": "a", "kind": "apath", "inputs": {"check": "flow-commutation", "bogus": 1}}"#,
    ]
    .iter()
    .enumerate()
    {
        let path = dir.path().join(format!("{i}.json"));
        std::fs::write(&path, text).unwrap();
        let out = coupling().arg("check").arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(coupling().arg("check").arg(dir.path().join("missing.json")).status().unwrap().code(), Some(2));
}

#[test]
fn inline_fields_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inline.json");
    // symplectic R^2 fibers with a constant shear connection over R^2
    std::fs::write(
        &path,
        r#"{"name": "inline", "kind": "coupling-check", "inputs": {"inline": {
            "base": ["b1", "b2"], "fiber": ["x1", "x2"],
            "pi_v": ["1"], "connection": ["0", "0", "0", "0"], "omega_h": ["b1^2 + 1"]}}}"#,
    )
    .unwrap();
    let report = run_file(&path).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{}", report.summary());
    std::fs::write(
        &path,
        r#"{"name": "inline", "kind": "coupling-check", "inputs": {"inline": {
            "base": ["b1", "b2"], "fiber": ["x"],
            "pi_v": [], "connection": ["0", "b1"], "omega_h": ["0"]}}}"#,
    )
    .unwrap();
    let report = run_file(&path).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let strip = |path: PathBuf| {
        let mut r = run_file(&path).unwrap();
        r.wall_ms = 0;
        r.to_json()
    };
    for name in ["oracle-suite.json", "groupoid-suite.json", "split-round-trip.json"] {
        assert_eq!(strip(scenario(name)), strip(scenario(name)), "{name}");
    }
}

#[test]
fn every_shipped_scenario_except_the_malformed_one_loads() {
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let loaded = coupling_cli::scenario::Scenario::load(&path);
        assert_eq!(loaded.is_err(), path.ends_with("malformed.json"), "{}", path.display());
    }
}

#[test]
fn example_listing() {
    let all = list_examples(None);
    for name in ["hopf", "so3-coadjoint", "round-sphere"] {
        assert!(all.iter().any(|(n, _)| n == name), "{name}");
    }
    assert_eq!(list_examples(Some("")).len(), all.len());
    assert!(list_examples(Some("no-such-example")).is_empty());
    let out = coupling().args(["examples", "no-such-example"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let out = coupling().arg("version").output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("coupling "));
}
