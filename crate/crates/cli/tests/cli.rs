use std::process::{Command, Output};

use serde_json::Value;

fn amlkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amlkit")).args(args).env_remove("AMLKIT_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = amlkit(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    amlkit(args).status.code().unwrap()
}

#[test]
fn generate_example_network() {
    let sf = json(&["generate", "mincostflow", "--default"]);
    assert_eq!(sf["num_vars"], 6);
    assert_eq!(sf["b"].as_array().unwrap().len(), 4);
    assert_eq!(sf["senses"].as_array().unwrap().len(), 4);
    let caps: Vec<f64> = sf["ub"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(caps, [0.5, 0.4, 0.6, 0.3, 0.6, 0.5]);
}

#[test]
fn generate_lqcp_count() {
    // (m+1)(n+1) states plus m+1 controls.
    let sf = json(&["generate", "lqcp", "--n", "4", "--m", "4"]);
    assert_eq!(sf["num_vars"], 5 * 5 + 5);
}

#[test]
fn generate_is_deterministic_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["generate", "fac", "--g", "2", "--out", a.to_str().unwrap()]);
    ok(&["generate", "--family", "fac", "--g", "2", "--out", b.to_str().unwrap()]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn generate_nonlinear_structure() {
    let s = json(&["generate", "clnlbeam", "--n", "5"]);
    assert_eq!(s["num_vars"], 18);
    assert_eq!(s["num_eq"], 10);
    assert_eq!(s["colors"], 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(exit_code(&["generate", "lqcp", "--n", "-1"]), 2);
    assert_eq!(exit_code(&["generate", "lqcp", "--n", "0"]), 2);
    assert_eq!(exit_code(&["generate", "lqcp", "--n", "2001"]), 2);
    assert_eq!(exit_code(&["generate", "nosuchfamily"]), 2);
    assert_eq!(exit_code(&["generate", "mincostflow", "--default", "--n", "3"]), 2);
    assert_eq!(exit_code(&["solve", "l2ball", "--tol", "-1"]), 2);
    assert_eq!(exit_code(&["solve", "l2ball", "--method", "simplex"]), 2);
    assert_eq!(exit_code(&["solve", "lqcp"]), 2);
    assert_eq!(exit_code(&["bench", "--family", "clnlbeam", "--sizes", "5001"]), 2);
}

#[test]
fn solve_l2ball() {
    let r = json(&["solve", "l2ball", "--n", "2", "--tol", "1e-6"]);
    assert_eq!(r["status"], "optimal");
    assert!((r["objective"].as_f64().unwrap() - 2f64.sqrt()).abs() <= 1e-5);
}

#[test]
fn solve_example_network() {
    let r = json(&["solve", "mincostflow", "--default"]);
    assert_eq!(r["status"], "optimal");
    assert!((r["objective"].as_f64().unwrap() - 4.0).abs() <= 1e-9);
}

#[test]
fn solve_single_facility() {
    // One customer at the center of the unit square: the facility sits there
    // and the distance to the far corner is √2/2.
    let r = json(&["solve", "fac", "--g", "1", "--f", "1"]);
    assert_eq!(r["status"], "optimal");
    assert!((r["objective"].as_f64().unwrap() - 0.5f64.sqrt()).abs() <= 1e-5);
}

#[test]
fn solve_methods_agree_on_lp() {
    let a = json(&["solve", "mincostflow", "--n", "8", "--method", "simplex"]);
    let b = json(&["solve", "mincostflow", "--n", "8"]);
    assert_eq!(a["objective"], b["objective"]);
}

#[test]
fn solve_standard_form_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    ok(&["generate", "mincostflow", "--default", "--out", path.to_str().unwrap()]);
    let r = json(&["solve", path.to_str().unwrap()]);
    assert!((r["objective"].as_f64().unwrap() - 4.0).abs() <= 1e-9);
}

#[test]
fn solve_trace_goes_to_stderr() {
    let o = amlkit(&["solve", "l2ball", "--n", "2", "--trace"]);
    assert!(o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("iter=")).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l.contains("objective=") && l.contains("cuts=")));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["cuts"].as_u64().unwrap() as usize, lines.len() - 1);
}

#[test]
fn solve_sweep_csv() {
    let csv = ok(&["solve", "l2ball", "--sweep", "n=2,3,4"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,status,objective,pivots,cuts,nodes");
    assert_eq!(lines.len(), 4);
    for (line, n) in lines[1..].iter().zip([2.0f64, 3.0, 4.0]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2], "optimal");
        assert!((cols[3].parse::<f64>().unwrap() - n.sqrt()).abs() <= 1e-5);
    }
}

#[test]
fn check_beam_reports_diagonal() {
    let out = ok(&["check", "clnlbeam", "--n", "5"]);
    assert!(out.lines().any(|l| l == "hessian: diagonal, colors=1, max_fd_err<1e-6"), "{out}");
}

#[test]
fn check_every_family() {
    for f in ["mincostflow", "lqcp", "fac", "clnlbeam", "quadexample", "l2ball", "sqrt"] {
        let out = ok(&["check", f, "--points", "2"]);
        assert!(out.contains("gradient: max_rel_err="), "{f}: {out}");
    }
}

#[test]
fn check_fig4() {
    assert_eq!(ok(&["check", "fig4"]).trim(), "colors=2, recovery exact");
    let dump = ok(&["check", "fig4", "--dump-coloring"]);
    assert!(dump.starts_with("colors=2\n"));
    assert!(dump.contains("plan_steps="));
}

#[test]
fn corrupted_derivative_fails() {
    let o = amlkit(&["check", "clnlbeam", "--n", "5", "--corrupt-derivative"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("gradient"));
}

fn non_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect()
}

#[test]
fn bench_quadexample_scaling() {
    let csv = ok(&["bench", "--family", "quadexample", "--sizes", "100,200,400"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "family,size,build_ms,extract_ms,eval3_ms");
    assert_eq!(lines.len(), 4);
    let build: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(build.windows(2).all(|w| w[0] < w[1]), "{build:?}");
}

#[test]
fn bench_beam_rows_and_determinism() {
    let a = ok(&["bench", "--family", "clnlbeam", "--sizes", "500,5000"]);
    assert_eq!(a.lines().count(), 3);
    let b = ok(&["bench", "--family", "clnlbeam", "--sizes", "500,5000"]);
    assert_eq!(non_timing(&a), non_timing(&b));
}

#[test]
fn bench_thread_env() {
    let o = Command::new(env!("CARGO_BIN_EXE_amlkit"))
        .args(["bench", "--family", "l2ball,fac", "--sizes", "2"])
        .env("AMLKIT_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(non_timing(&String::from_utf8(o.stdout).unwrap())[1..], ["l2ball,2", "fac,2"]);
    let bad = Command::new(env!("CARGO_BIN_EXE_amlkit"))
        .args(["bench", "--family", "l2ball", "--sizes", "2"])
        .env("AMLKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_file() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "[fac]\nf = 1\n").unwrap();
    let r = json(&["--config", good.to_str().unwrap(), "solve", "fac", "--g", "1"]);
    assert!((r["objective"].as_f64().unwrap() - 0.5f64.sqrt()).abs() <= 1e-5);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "tolerance = 1e-3\n").unwrap();
    assert_eq!(exit_code(&["--config", bad.to_str().unwrap(), "solve", "l2ball"]), 2);
    assert_eq!(exit_code(&["--config", "/nonexistent/amlkit.toml", "solve", "l2ball"]), 2);
}
