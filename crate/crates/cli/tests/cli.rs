use std::path::Path;
use std::process::{Command, Output};

fn minpair(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minpair"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_single_state_prints_cheapest_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = minpair(dir.path(), &["solve", "--preset", "single"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().find(|l| l.starts_with("rho*")).unwrap().to_string();
    let rho: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert_eq!(rho, 2.0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(v["rho_star"], 2.0);
    assert!(dir.path().join("meta.json").exists());
}

#[test]
fn sweep_approaches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let o = minpair(dir.path(), &["solve", "--preset", "random:3:3:11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("solution.json")).unwrap()).unwrap();
    let rho = v["rho_star"].as_f64().unwrap();

    let o = minpair(dir.path(), &["sweep", "--preset", "random:3:3:11", "--alphas", "0.9,0.99,0.999"]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["alpha", "m_alpha", "scaled_m_alpha", "iterations", "residual", "status"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let last: f64 = rows[2][2].parse().unwrap();
    assert!((last - rho).abs() <= 1e-2, "{last} vs {rho}");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--preset", "random:4:2:3", "--horizon", "2000", "--paths", "50", "--seed", "5"];
    for d in [&a, &b] {
        assert_eq!(minpair(d.path(), &args).status.code(), Some(0));
    }
    for f in ["pathwise.csv", "estimate.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        assert!(x.ends_with(b"\n"));
    }
    let other = tempfile::tempdir().unwrap();
    let mut changed = args.to_vec();
    changed[8] = "6";
    minpair(other.path(), &changed);
    assert_ne!(
        std::fs::read(a.path().join("pathwise.csv")).unwrap(),
        std::fs::read(other.path().join("pathwise.csv")).unwrap()
    );
}

#[test]
fn generated_model_file_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(minpair(dir.path(), &["generate", "--preset", "ex1-harris", "--truncation", "30"]).status.code(), Some(0));
    let model = dir.path().join("model.json");
    let o = minpair(dir.path(), &["solve", "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("rho*"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(minpair(dir.path(), &["solve"]).status.code(), Some(2));
    assert_eq!(minpair(dir.path(), &["solve", "--preset", "ex9"]).status.code(), Some(2));
    assert_eq!(minpair(dir.path(), &["sweep", "--preset", "single", "--alphas", "1.2"]).status.code(), Some(2));
    assert_eq!(minpair(dir.path(), &["solve", "--model", "/nonexistent/model.json"]).status.code(), Some(2));
    let failures: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("failures.json")).unwrap()).unwrap();
    assert_eq!(failures[0]["kind"], "config");
}

#[test]
fn failed_check_exits_1_with_named_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = minpair(
        dir.path(),
        &["certify", "--preset", "ex2-gauss", "--su-threshold", "1e6", "--horizon", "500", "--paths", "20", "--radii", "1"],
    );
    assert_eq!(o.status.code(), Some(1));
    let failures: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("failures.json")).unwrap()).unwrap();
    let f = &failures.as_array().unwrap()[0];
    assert_eq!(f["module"], "assumption-certify");
    assert_eq!(f["invariant"], "strictly-unbounded-cost");
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly-unbounded-cost"));
    for name in ["su.json", "m.json", "g.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn diagnose_birth_reset_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = minpair(dir.path(), &["diagnose", "--preset", "ex1-nonharris", "--truncation", "3", "--depth", "100000"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("recurrence.json")).unwrap()).unwrap();
    assert_eq!(v["classification"], "positive_not_harris");
    assert!(stdout(&o).contains("inf(partial="));
}

#[test]
fn reproduce_ex2_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = minpair(dir.path(), &["reproduce", "ex2", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["check", "value", "target", "tolerance", "passed"]);
    assert!(r.records().all(|x| &x.unwrap()[4] == "true"));
}
