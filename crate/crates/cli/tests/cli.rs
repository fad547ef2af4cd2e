use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flowfactor(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowfactor"));
    cmd.args(args).env_remove("FLOWFACTOR_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("FLOWFACTOR_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_names_builtins() {
    let o = flowfactor(&["list"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["paper-symplectic", "qr-oracle", "killing-degenerate", "lyapunov-diag", "cascade-iso-vol-affine"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(text.lines().count() >= 5);
}

#[test]
fn run_builtin_writes_artifacts_under_env_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowfactor(&["run", "paper-symplectic", "--t-end", "1.5"], Some(dir.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASSED"));
    let out = dir.path().join("paper-symplectic");
    for f in ["report.json", "report.txt", "scenario.toml", "path_000.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("path_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# flowfactor-csv v1"));
    assert!(lines.next().unwrap().starts_with("t,x_0,"));
    // t_end override: 1500 steps plus the initial row
    assert_eq!(lines.count(), 1501);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "killing-degenerate", "--t-end", "0.1", "--paths", "2", "--seed", "99", "--out-dir"];
    for d in [&a, &b] {
        let mut v = args.to_vec();
        v.push(d.path().to_str().unwrap());
        assert!(flowfactor(&v, None).status.success());
    }
    for f in ["path_000.csv", "path_001.csv", "report.json"] {
        let x = fs::read(a.path().join("killing-degenerate").join(f)).unwrap();
        let y = fs::read(b.path().join("killing-degenerate").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn scheme_and_reprojection_flags() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let o = flowfactor(&["run", "qr-oracle", "--t-end", "0.2", "--paths", "1", "--scheme", "heun", "--no-reproject", "--out-dir", root], None);
    // Heun's step defect can legitimately fail the tolerances; only the plumbing is checked here.
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("scheme=heun") && text.contains("reproject=false") && text.contains("paths=1"));
    assert!(dir.path().join("qr-oracle").join("path_000.csv").is_file());
    assert!(!dir.path().join("qr-oracle").join("path_001.csv").exists());
}

#[test]
fn malformed_file_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.toml");
    fs::write(&file, "name = \"broken\"\ndimension = 2\nt_end = [1.0\n").unwrap();
    let out = dir.path().join("out");
    let o = flowfactor(&["run", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    fs::write(
        &file,
        r#"
name = "bad"
dimension = 2
t_end = 1.0
dt = 0.01
structure = "isometry"
x0 = [0.0, 0.0, 0.0]

[driver]
kind = "brownian"

[[fields]]
kind = "affine"
a = [[0.0, 1.0], [-1.0, 0.0]]
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = flowfactor(&["run", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("x0"));
    assert!(!out.exists());
}

#[test]
fn failing_tolerance_exits_nonzero_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("strict.toml");
    fs::write(
        &file,
        r#"
name = "strict"
dimension = 2
t_end = 0.5
dt = 0.1
scheme = "heun"
structure = "isometry"
x0 = [0.0, 0.0]
reproject = false
checks = ["killing"]

[tolerances]
killing_q = 1e-300

[driver]
kind = "control"
breakpoints = []
values = []

[[fields]]
kind = "affine"
a = [[1.0, 2.0], [0.0, -1.0]]
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = flowfactor(&["run", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));
    assert!(out.join("strict").join("report.json").is_file());
}

#[test]
fn export_truth_to_stdout_and_file() {
    let o = flowfactor(&["export-truth", "paper-symplectic", "--dt", "0.5"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[0].starts_with("# flowfactor-csv v1"));
    assert_eq!(rows.len(), 2 + 5);
    assert!(rows[3].starts_with("5.0000000000000000e-1,"));

    let dir = tempfile::tempdir().unwrap();
    let o = flowfactor(&["export-truth", "lyapunov-diag", "--out-dir", dir.path().to_str().unwrap()], None);
    assert!(o.status.success());
    assert!(dir.path().join("lyapunov-diag").join("truth.csv").is_file());

    let o = flowfactor(&["export-truth", "qr-oracle"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_scenario_is_an_error() {
    let o = flowfactor(&["run", "no-such-thing"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_example_scenarios_pass() {
    let examples = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(examples).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = flowfactor(&["run", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()], None);
            assert!(o.status.success(), "{}: {}", path.display(), stdout(&o));
            seen += 1;
        }
    }
    assert!(seen > 0);
}
