use std::path::{Path, PathBuf};
use std::process::Command;

use lidskii_cli::report::Report;
use lidskii_cli::scenario::{FixtureSource, Scenario};
use lidskii_core::matrixcore::sectorial_check;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lidskii"))
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn run(scenario: &Path, out: &Path) -> (i32, Option<Report>) {
    let status = bin()
        .arg("run")
        .arg(scenario)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap();
    let report = std::fs::read_to_string(out.join("report.json"))
        .ok()
        .map(|t| serde_json::from_str(&t).unwrap());
    (status, report)
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let st = bin()
            .args(["gen", "--kind", "diagonal", "--dim", "4", "--seed", "7", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        bytes.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn gen_jordan_mixed_respects_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("j.json");
    let st = bin()
        .args(["gen", "--kind", "jordan-mixed", "--dim", "8", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let s = Scenario::load(&out).unwrap();
    let FixtureSource::Recipe(r) = &s.fixture else { panic!("expected recipe") };
    assert!(r.specs.iter().flat_map(|c| c.chains.iter()).all(|l| (1..=3).contains(l)));
    assert_eq!(r.dim(), 8);
    let (b, _) = s.build_fixture().unwrap();
    assert!(sectorial_check(&b, std::f64::consts::PI / 5.0, 4000, 9).unwrap().holds);
}

#[test]
fn gen_guards() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    for args in [
        ["--kind", "diagonal", "--dim", "0"],
        ["--kind", "diagonal", "--dim", "65"],
        ["--kind", "banded", "--dim", "3"],
    ] {
        let st = bin().arg("gen").args(args).arg("--out").arg(&out).status().unwrap();
        assert_eq!(st.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn trivial_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&examples().join("trivial1.json"), dir.path());
    assert_eq!(code, 0);
    assert!(report.unwrap().pass);
    let csv = std::fs::read_to_string(dir.path().join("evolution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,norm_u,oracle_diff,ode_residual,tail_bound"));
    for line in lines {
        let residual: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(residual <= 1e-10, "{line}");
    }
}

#[test]
fn non_accretive_contraction_is_gated() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&examples().join("nonaccretive.json"), dir.path());
    assert_eq!(code, 1);
    let report = report.unwrap();
    assert!(!report.pass);
    let c = report.checks.iter().find(|c| c.name == "contraction").unwrap();
    let kind = &c.error.as_ref().unwrap().kind;
    assert!(kind == "PreconditionFailed" || kind == "ContractionViolation");
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(examples().join("trivial1.json")).unwrap();
    for (from, to) in [("\"ode\"", "\"plot\""), ("\"name\"", "\"nme\""), ("{", "[")] {
        let path = dir.path().join("bad.json");
        std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
        let (code, report) = run(&path, &dir.path().join("out"));
        assert_eq!(code, 2, "{to}");
        assert!(report.is_none());
    }
    let (code, _) = run(&dir.path().join("missing.json"), &dir.path().join("out"));
    assert_eq!(code, 2);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = examples().join("jordan8.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&scenario, &a).0, 0);
    assert_eq!(run(&scenario, &b).0, 0);
    for f in ["report.json", "residue.csv", "grouping.csv", "evolution.csv", "tails.csv", "stats.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = examples().join("sectorial6.json");
    let seq = run(&scenario, &dir.path().join("s")).1.unwrap();
    let st = bin()
        .arg("run")
        .arg(&scenario)
        .arg("--parallel")
        .arg("--out-dir")
        .arg(dir.path().join("p"))
        .status()
        .unwrap();
    assert!(st.success());
    let par: Report = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p/report.json")).unwrap()).unwrap();
    let tol = lidskii_cli::report::Tolerance::default();
    assert!(lidskii_cli::report::compare(&par, &seq, &tol).is_empty());
}

#[test]
fn verify_all_bundled_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("verify-all")
        .arg(examples())
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS jordan8"));
    assert!(dir.path().join("jordan8/report.json").exists());
}

#[test]
fn verify_all_detects_drift() {
    let dir = tempfile::tempdir().unwrap();
    let src = examples();
    std::fs::create_dir_all(dir.path().join("golden")).unwrap();
    std::fs::copy(src.join("trivial1.json"), dir.path().join("trivial1.json")).unwrap();
    let golden = std::fs::read_to_string(src.join("golden/trivial1.json")).unwrap();
    let mut g: serde_json::Value = serde_json::from_str(&golden).unwrap();
    g["report"]["checks"][0]["metrics"]["max_oracle_diff"] = serde_json::json!(1e-3);
    std::fs::write(dir.path().join("golden/trivial1.json"), g.to_string()).unwrap();
    let out = bin()
        .arg("verify-all")
        .arg(dir.path())
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max_oracle_diff"));
}
