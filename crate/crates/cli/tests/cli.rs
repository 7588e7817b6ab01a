use std::path::Path;
use std::process::{Command, Output};

const GAUSS: &str = r#"
    means = [1.0, 0.0]
    delta = [0.1, 0.01]
    replications = 3
    seed = 7
    [family]
    kind = "gaussian"
    box = [-1.0, 2.0]
    [problem]
    kind = "bai"
    [algorithm]
    name = "tas"
"#;

fn tas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tas")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_prints_the_two_arm_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAUSS);
    let o = tas(&["oracle", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("t_star_inv = 0.125000000000"), "{}", stdout(&o));

    let o = tas(&["oracle", "--config", &cfg, "--format", "jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["t_star_inv"].as_f64().unwrap() - 0.125).abs() < 1e-12);
}

#[test]
fn mc_prints_one_row_per_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAUSS);
    let runs = dir.path().join("runs.jsonl");
    let o = tas(&["mc", "--config", &cfg, "--runs", runs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("delta,"));
    assert_eq!(std::fs::read_to_string(&runs).unwrap().lines().count(), 6);

    let o = tas(&["mc", "--config", &cfg, "--delta", "0.2", "--format", "jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn run_is_reproducible_from_seed_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAUSS);
    let args = ["run", "--config", &cfg, "--index", "2", "--format", "jsonl"];
    let a = tas(&args);
    let b = tas(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let other = tas(&["run", "--config", &cfg, "--index", "2", "--seed", "8", "--format", "jsonl"]);
    assert_ne!(stdout(&a), stdout(&other));
}

#[test]
fn project_clips_to_the_simplex() {
    let o = tas(&["project", "--weights", "1,0,0", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let p: Vec<f64> = stdout(&o).trim().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(p.len(), 3);
    assert!((p[0] - 0.8).abs() < 1e-12 && (p[1] - 0.1).abs() < 1e-12 && (p[2] - 0.1).abs() < 1e-12);
}

#[test]
fn bounds_reports_each_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), GAUSS);
    let o = tas(&["bounds", "--config", &cfg, "--format", "jsonl"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r["upper_bound"].as_f64().unwrap() >= r["lower_bound"].as_f64().unwrap());
    }
}

#[test]
fn selftest_passes() {
    let o = tas(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().count() >= 5 && out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(tas(&["--help"]).status.code(), Some(0));
    assert_eq!(tas(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tas(&["oracle"]).status.code(), Some(1));
    assert_eq!(tas(&["project", "--weights", "1,0", "--eps", "0.9"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = config(dir.path(), &GAUSS.replace("means = [1.0, 0.0]", "means = [1.0, 5.0]"));
    assert_eq!(tas(&["oracle", "--config", &bad]).status.code(), Some(1));
    let unknown = config(dir.path(), &format!("colour = 3\n{GAUSS}"));
    assert_eq!(tas(&["oracle", "--config", &unknown]).status.code(), Some(1));

    let cfg = config(dir.path(), GAUSS);
    let missing = dir.path().join("no/such/dir/out.txt");
    assert_eq!(tas(&["oracle", "--config", &cfg, "--out", missing.to_str().unwrap()]).status.code(), Some(2));
}
