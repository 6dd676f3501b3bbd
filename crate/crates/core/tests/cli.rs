use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnmcert::certify::RecoveryCertificate;
use nnmcert::solver::SolverResult;
use nnmcert::sweep::SweepReport;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn nnmcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnmcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn certify(truth: &str, op: &str, report: &Path) -> Output {
    nnmcert(&[
        "certify",
        "--truth",
        path(&fixture(truth)),
        "--operator",
        path(&fixture(op)),
        "--report",
        path(report),
    ])
}

#[test]
fn real_curve_has_401_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = nnmcert(&[
        "counterexample",
        "--field",
        "real",
        "--t-min",
        "-2",
        "--t-max",
        "2",
        "--step",
        "0.01",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("param1,param2,numeric,closed_form,abs_err"));
    assert_eq!(lines.count(), 401);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.summary.json")).unwrap()).unwrap();
    assert!(summary["max_abs_err"].as_f64().unwrap() <= 1e-9);
    assert_eq!(summary["min_value"].as_f64(), Some(1.0));
}

#[test]
fn complex_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o = nnmcert(&[
        "counterexample",
        "--field",
        "complex",
        "--a-max",
        "1",
        "--a-step",
        "0.5",
        "--theta-step",
        "1.5707963267948966",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1 + 3 * 4);
}

#[test]
fn mixed_grid_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = nnmcert(&["counterexample", "--field", "real", "--a-max", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: parse: "));
}

#[test]
fn certify_counterexample_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = certify("counterexample_truth.json", "counterexample_operator.json", &report);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["status"], "Unique");
    assert_eq!(v["directions"][0]["case"], "ZeroWithEscape");
    assert_eq!(v["directions"][0]["escapes"], serde_json::json!(["c"]));
    let cert: RecoveryCertificate = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&cert).unwrap() + "\n", text);
}

#[test]
fn certify_flat_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = certify("flat_truth.json", "flat_operator.json", &report);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert: RecoveryCertificate = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(format!("{:?}", cert.status), "NotUnique");
    assert!(cert.witness.is_some());
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = nnmcert(&[
            "certify",
            "--truth",
            path(&fixture("flat_truth.json")),
            "--operator",
            path(&fixture("flat_operator.json")),
            "--report",
            path(p),
            "--seed",
            "9",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    for p in [&a, &b] {
        let o = nnmcert(&[
            "sweep",
            "--n",
            "3",
            "--r",
            "1",
            "--m-list",
            "8,7",
            "--trials",
            "2",
            "--seed",
            "4",
            "--report",
            path(p),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap());
    let report: SweepReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.instances.len(), 4);
}

#[test]
fn solve_flat_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.json");
    let o = nnmcert(&[
        "solve",
        "--operator",
        path(&fixture("flat_operator.json")),
        "--b",
        path(&fixture("flat_b.json")),
        "--out",
        path(&out),
        "--method",
        "subgradient",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let res: SolverResult = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((res.objective - 1.0).abs() <= 1e-6);
    assert_eq!(res.options.method, nnmcert::solver::Method::Subgradient);
}

#[test]
fn infeasible_system_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("op.json");
    let b = dir.path().join("b.json");
    let e11 = r#"{"rows":2,"cols":2,"field":"real","data":[1,0,0,0]}"#;
    std::fs::write(
        &op,
        format!(r#"{{"shape":[2,2],"field":"real","measurements":[{e11},{e11}]}}"#),
    )
    .unwrap();
    std::fs::write(&b, r#"{"field":"real","values":[1,2]}"#).unwrap();
    let o = nnmcert(&[
        "solve",
        "--operator",
        path(&op),
        "--b",
        path(&b),
        "--out",
        path(&dir.path().join("y.json")),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.starts_with("error: infeasible: "));
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = certify("counterexample_truth.json", "missing.json", &report);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: parse: "));

    let o = certify("flat_truth.json", "counterexample_b.json", &report);
    assert_eq!(o.status.code(), Some(2));

    let o = nnmcert(&["certify", "--truth", "x.json", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: usage: "));

    let o = nnmcert(&[
        "sweep",
        "--n",
        "3",
        "--r",
        "5",
        "--m-list",
        "8",
        "--trials",
        "1",
        "--report",
        path(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: precondition: "));
}

#[test]
fn l1check_prints_both_values() {
    let o = nnmcert(&[
        "l1check",
        "--x",
        path(&fixture("l1_x.json")),
        "--y",
        path(&fixture("l1_y.json")),
        "--K",
        "0,2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["l1_value"].as_f64(), Some(2.25));
    assert!(v["abs_diff"].as_f64().unwrap() <= 1e-9);

    let o = nnmcert(&[
        "l1check",
        "--x",
        path(&fixture("l1_x.json")),
        "--y",
        path(&fixture("l1_y.json")),
        "--K",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: precondition: "));
}

#[test]
fn lemmas_report_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("l.json");
    let o = nnmcert(&["lemmas", "--trials", "1000", "--seed", "42", "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["violations"], serde_json::json!([]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"]["lemma1"]["trials"], 1000);
}
