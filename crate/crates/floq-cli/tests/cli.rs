use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn floq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floq")).args(args).env("FLOQ_THREADS", "1").output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn invariants_at_zero_critical_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = floq(&["invariants", "--theta", "0.75pi", "--phi", "pi", "--out", &out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(entries(&out), vec!["invariants.json", "manifest.cfg"]);
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("invariants.json")).unwrap()).unwrap();
    assert_eq!(j["omega_pair"], serde_json::json!([1, 0]));
    assert_eq!(j["predicted"], serde_json::json!([4, 0]));
    assert_eq!(j["closing_flag"], "pi_closing");
}

#[test]
fn spectrum_has_four_pi_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = floq(&["spectrum", "--theta", "1.25pi", "--phi", "pi", "--L", "40", "--out", &out_arg(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,quasienergy,ipr"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6400);
    let near_pi = rows.iter().filter(|(e, ipr)| std::f64::consts::PI - e.abs() < 1e-8 && *ipr > 0.05).count();
    assert_eq!(near_pi, 4);
}

#[test]
fn validation_errors_exit_two_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("z");
    let o = floq(&["spectrum", "--theta", "pi", "--phi", "pi", "--L", "0", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(entries(tmp.path()).is_empty());
    assert_eq!(floq(&["spectrum", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(floq(&["spectrum", "--theta", "pi", "--phi", "pi", "--bc", "twisted", "--out", &out_arg(&out)]).status.code(), Some(2));
    assert!(entries(tmp.path()).is_empty());
}

#[test]
fn numerical_failure_exits_three_and_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let args = ["analytic-modes", "--theta", "0.75pi", "--phi", "pi", "--L", "20", "--eps-tol", "1e-300"];
    let o = floq(&[&args[..], &["--out", &out_arg(&out)]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert!(entries(tmp.path()).is_empty());
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = ["disorder-sweep", "--theta", "0.75pi", "--phi", "pi", "--L", "6", "--lambda", "0.2", "--realizations", "2", "--seed", "4"];
    for dir in [&a, &b] {
        assert!(floq(&[&args[..], &["--out", &out_arg(dir)]].concat()).status.success());
    }
    let body = |d: &Path| fs::read(d.join("robustness.json")).unwrap();
    assert_eq!(body(&a), body(&b));
    let manifest = a.join("manifest.cfg");
    let o = floq(&["disorder-sweep", "--config", manifest.to_str().unwrap(), "--out", &out_arg(&c)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(body(&a), body(&c));
    // A config written for one command is refused by another.
    assert_eq!(floq(&["spectrum", "--config", manifest.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn phase_diagram_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let o = floq(&["phase-diagram", "--a", "0:2pi:8", "--b", "0:2pi:8", "--centered", "--out", &out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = entries(&out);
    assert!(names.contains(&"scan.csv".to_string()) && names.contains(&"boundaries.csv".to_string()));
    assert_eq!(fs::read_to_string(out.join("scan.csv")).unwrap().lines().count(), 65);
}
