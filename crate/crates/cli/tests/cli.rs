use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn etc_stab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etc-stab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_graph_exit_codes() {
    let ok = etc_stab(&["check-graph", path(&scenario("paper_A2"))]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let bad = etc_stab(&["check-graph", path(&scenario("unpinned"))]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn design_prints_certificate_json() {
    let o = etc_stab(&["design", path(&scenario("paper_A2"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let residual = v["riccati_residual"].as_f64().unwrap();
    let bound = v["riccati_residual_bound"].as_f64().unwrap();
    assert!(residual <= bound);
    assert!(v["K"].is_array());
}

#[test]
fn simulate_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = etc_stab(&[
        "simulate",
        path(&scenario("paper_A2")),
        "--mode",
        "detc",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "trajectory.csv",
        "events.csv",
        "phi.csv",
        "metrics.csv",
        "report.json",
        "scenario.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "detc");
    assert_eq!(report["termination"]["status"], "completed");

    // the echoed scenario reproduces the run
    let again = tmp.path().join("again");
    let o = etc_stab(&[
        "simulate",
        path(&out.join("scenario.json")),
        "--mode",
        "detc",
        "--out",
        path(&again),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(out.join("events.csv")).unwrap(),
        fs::read(again.join("events.csv")).unwrap()
    );
}

#[test]
fn divergent_run_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = etc_stab(&[
        "simulate",
        path(&scenario("paper_A1")),
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("DIVERGED"));
}

#[test]
fn malformed_file_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(scenario("paper_A2"))
        .unwrap()
        .replace("\"sigma\": 0.5", "\"sigma\": -0.5");
    let file = tmp.path().join("bad.json");
    fs::write(&file, &src).unwrap();
    let o = etc_stab(&["design", path(&file)]);
    assert_eq!(code(&o), 1);
    let line = src
        .lines()
        .position(|l| l.contains("\"sigma\": -0.5"))
        .unwrap()
        + 1;
    assert!(stderr(&o).contains(&format!(":{line}")), "{}", stderr(&o));

    fs::write(&file, "{\n  \"dynamics\": [\n").unwrap();
    assert_eq!(code(&etc_stab(&["design", path(&file)])), 1);
}

#[test]
fn solver_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(scenario("paper_A2"))
        .unwrap()
        .replace(
            "[-1.0, 1.0],\n      [2.0, -3.0]",
            "[1.0, 0.0],\n      [0.0, 2.0]",
        )
        .replace("[-1.0],\n      [0.0]", "[1.0],\n      [0.0]");
    let file = tmp.path().join("unstabilizable.json");
    fs::write(&file, src).unwrap();
    let o = etc_stab(&["design", path(&file)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(code(&etc_stab(&["simulate"])), 1);
    assert_eq!(
        code(&etc_stab(&[
            "simulate",
            path(&scenario("paper_A2")),
            "--mode",
            "fast"
        ])),
        1
    );
    assert_eq!(code(&etc_stab(&["--help"])), 0);
}

#[test]
fn sweep_tabulates_each_value() {
    let tmp = tempfile::tempdir().unwrap();
    let o = etc_stab(&[
        "sweep",
        path(&scenario("paper_A2")),
        "--param",
        "k-scale",
        "--values",
        "0.5,1",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3, "{table}");
    assert!(rows[0].starts_with("param,value,mode,status"));
    assert!(tmp.path().join("k-scale=0.5").is_dir());
}
