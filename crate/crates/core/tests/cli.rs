//! End-to-end checks of the `fraclevel` binary: output formats, exit codes,
//! determinism and thread control.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fraclevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclevel"))
        .args(args)
        .env_remove("FRACLEVEL_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn ml_prints_e() {
    let o = fraclevel(&["ml", "--rho", "1", "--nu", "1", "--z", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "2.718281828459045");
}

#[test]
fn ml_batch_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("z.csv");
    let out = dir.path().join("ml.csv");
    fs::write(&input, "z\n0\n-1\n").unwrap();
    let o = fraclevel(&[
        "ml",
        "--rho",
        "2",
        "--nu",
        "1",
        "--batch",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z,value"));
    assert_eq!(lines.next(), Some("0,1"));
    let cos_one: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((cos_one - 1f64.cos()).abs() < 1e-14);
}

#[test]
fn inadmissible_parameters_exit_2_naming_the_constraint() {
    let o = fraclevel(&[
        "lfd", "eval", "--rho", "0.5", "--nus", "0.9,0.9", "--f", "t^2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho + r_1 <= 1"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(fraclevel(&["ml", "--rho", "1"]).status.code(), Some(2));
    assert_eq!(fraclevel(&["bogus"]).status.code(), Some(2));
    assert_eq!(fraclevel(&["--help"]).status.code(), Some(0));
}

#[test]
fn failing_suite_exits_3_with_achieved_tolerance() {
    let o = fraclevel(&[
        "verify",
        "--suite",
        "biorthogonality",
        "--k",
        "8",
        "--order",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("achieved"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_1() {
    let o = fraclevel(&[
        "inverse",
        "solve",
        "--spec",
        "/nonexistent/spec.json",
        "--out-prefix",
        "/tmp/x",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/spec.json"));
}

#[test]
fn verify_suites_pass() {
    for suite in ["semigroup", "fundamental", "biorthogonality", "reductions"] {
        let o = fraclevel(&["verify", "--suite", suite, "--cases", "20"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stderr(&o));
    }
}

#[test]
fn lfd_eval_run_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("run.json");
    fs::write(
        &spec,
        r#"{"rho": 0.5, "nus": [0.2, 0.4], "f": "t^2 + t^1.5", "checks": ["equivalence", "fundamental"]}"#,
    )
    .unwrap();
    let o = fraclevel(&["lfd", "eval", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["equivalence_discrepancy"].as_f64().unwrap() < 1e-11);
    assert!(v["lfd"].is_string());
}

#[test]
fn convergence_reports_second_order() {
    let o = fraclevel(&[
        "convergence",
        "--op",
        "J",
        "--alpha",
        "1.5",
        "--rho",
        "0.5",
        "--grids",
        "129,257,513",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn write_inverse_spec(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"rho": 0.6, "nus": [0.1, 0.8], "T": 1.0, "K": 4, "n_t": 257,
            "psi": "1 - x", "final_data": "x - x^2"}"#,
    )
    .unwrap();
    spec
}

fn solve_to(spec: &Path, prefix: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fraclevel"));
    cmd.args(["inverse", "solve", "--spec", spec.to_str().unwrap()])
        .args(["--out-prefix", prefix.to_str().unwrap()]);
    match threads {
        Some(t) => cmd.env("FRACLEVEL_THREADS", t),
        None => cmd.env_remove("FRACLEVEL_THREADS"),
    };
    cmd.output().unwrap()
}

#[test]
fn inverse_solve_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_inverse_spec(dir.path());
    let prefix = dir.path().join("run");
    let o = solve_to(&spec, &prefix, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let source = fs::read_to_string(dir.path().join("run_source.csv")).unwrap();
    assert_eq!(source.lines().count(), 202);
    assert_eq!(source.lines().next(), Some("x,f"));
    let state = fs::read_to_string(dir.path().join("run_state.csv")).unwrap();
    assert_eq!(state.lines().next(), Some("x,t,u"));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_diagnostics.json")).unwrap())
            .unwrap();
    // x - x² has infinitely many modes, so only the projected data is matched
    assert!(
        diag["diagnostics"]["final_coefficient_residual"]
            .as_f64()
            .unwrap()
            < 1e-12
    );
}

#[test]
fn inverse_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_inverse_spec(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(solve_to(&spec, &a, None).status.code(), Some(0));
    assert_eq!(solve_to(&spec, &b, Some("1")).status.code(), Some(0));
    for suffix in ["_source.csv", "_state.csv", "_diagnostics.json"] {
        let fa = fs::read(format!("{}{suffix}", a.display())).unwrap();
        let fb = fs::read(format!("{}{suffix}", b.display())).unwrap();
        assert_eq!(fa, fb, "{suffix} differs");
    }
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_inverse_spec(dir.path());
    let o = solve_to(&spec, &dir.path().join("c"), Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FRACLEVEL_THREADS"));
}
