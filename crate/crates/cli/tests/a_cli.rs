use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schottkydim"))
}

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let input = dir.join("config.json");
    fs::write(&input, config).unwrap();
    bin().current_dir(dir).arg(args[0]).arg("--input").arg(&input).args(&args[1..]).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn outputs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).filter(|n| n != "config.json").collect();
    v.sort();
    v
}

const DIM: &str = r#"{ "family": "mcmullen", "theta": 0.3, "depth": 10 }"#;

#[test]
fn dim_reports_delta_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let a = run(dir.path(), &["dim", "--output", "a"], DIM);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(dir.path(), &["dim", "--output", "b"], DIM);
    assert!(b.status.success());
    let v = json(&dir.path().join("a.json"));
    let delta = v["result"]["pressure"]["delta"].as_f64().unwrap();
    let br = &v["result"]["pressure"]["bracket"];
    assert!(br[0].as_f64().unwrap() <= delta && delta <= br[1].as_f64().unwrap());
    assert!((delta - 0.1418).abs() < 1e-3, "{delta}");
    for s in [".json", "_depth.csv"] {
        assert_eq!(fs::read(dir.path().join(format!("a{s}"))).unwrap(), fs::read(dir.path().join(format!("b{s}"))).unwrap());
    }
}

#[test]
fn tree_dim_of_limit_tree() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["tree-dim", "--output", "t"], r#"{ "preset": "mcmullen_limit_tree" }"#);
    assert!(out.status.success());
    let delta = json(&dir.path().join("t.json"))["result"]["pressure"]["delta"].as_f64().unwrap();
    assert!((delta - 1.386294).abs() <= 1e-3, "{delta}");
}

#[test]
fn malformed_json_exits_2_without_outputs() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["dim", "--output", "x"], r#"{ "family": "mcmullen", "theta": 0.3, "#);
    assert_eq!(out.status.code(), Some(2));
    assert!(outputs(dir.path()).is_empty());
}

#[test]
fn invalid_configs_exit_2() {
    let dir = TempDir::new().unwrap();
    for (cmd, cfg) in [
        ("dim", r#"{ "family": "mcmullen", "theta": 0.3, "bogus": 1 }"#),
        ("dim", r#"{ "family": "mcmullen", "theta": 3.0 }"#),
        ("dim", r#"{ "family": "mcmullen" }"#),
        ("dim", r#"{ "family": "matrices", "generators": [[[1, 0], [0, 1]]] }"#),
        ("tree-dim", r#"{ "preset": "nope" }"#),
        ("tree-dim", r#"{ "preset": "rose", "lengths": [1.0, -1.0] }"#),
        ("mcmullen-sweep", r#"{ "family": "mcmullen", "theta_list": [0.1, 0.2] }"#),
        ("embed", r#"{ "kernel": "power", "matrix": [[1, 2], [2, 1]], "t": 1.5 }"#),
        ("probe-continuity", r#"{ "family": "mcmullen", "theta": 0.3, "eps": [0.1], "perturbation": { "kind": "other" } }"#),
    ] {
        let out = run(dir.path(), &[cmd, "--output", "x"], cfg);
        assert_eq!(out.status.code(), Some(2), "{cmd} {cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = bin().current_dir(dir.path()).args(["dim", "--output", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(outputs(dir.path()).is_empty());
}

#[test]
fn numeric_failures_exit_3_with_module() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["dim", "--output", "x", "--depth", "2"], DIM);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension:"));
    let out = run(dir.path(), &["align", "--output", "x"], r#"{ "family": "mcmullen", "theta": 0.1, "tree": { "preset": "rose", "lengths": [1, 1, 1] }, "l": 1 }"#);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degeneration:"));
    assert!(outputs(dir.path()).is_empty());
}

#[test]
fn headers_carry_version_hash_and_seed() {
    let dir = TempDir::new().unwrap();
    run(dir.path(), &["dim", "--output", "a", "--seed", "7"], DIM);
    run(dir.path(), &["dim", "--output", "b", "--seed", "7", "--depth", "9"], DIM);
    let csv = fs::read_to_string(dir.path().join("a_depth.csv")).unwrap();
    let head: Vec<&str> = csv.lines().take(4).collect();
    assert_eq!(head[0], format!("# schottkydim {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(head[1], "# command dim");
    assert!(head[2].starts_with("# config_sha256 ") && head[2].len() == "# config_sha256 ".len() + 64);
    assert_eq!(head[3], "# seed 7");
    let (a, b) = (json(&dir.path().join("a.json")), json(&dir.path().join("b.json")));
    assert_eq!(a["header"]["seed"], 7);
    assert_eq!(a["header"]["config_hash"].as_str().unwrap(), &head[2]["# config_sha256 ".len()..]);
    assert_ne!(a["header"]["config_hash"], b["header"]["config_hash"]);
    assert_eq!(b["result"]["pressure"]["depth_used"], 9);
}

#[test]
fn csv_numbers_round_trip() {
    let dir = TempDir::new().unwrap();
    run(dir.path(), &["dim", "--output", "a"], DIM);
    let csv = fs::read_to_string(dir.path().join("a_depth.csv")).unwrap();
    let v = json(&dir.path().join("a.json"));
    let table = v["result"]["pressure"]["table"].as_array().unwrap();
    for (line, row) in csv.lines().filter(|l| !l.starts_with('#')).skip(1).zip(table) {
        let cell = line.split(',').nth(1).unwrap();
        let mantissa = cell.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
        assert_eq!(cell.parse::<f64>().unwrap(), row["delta_n"].as_f64().unwrap());
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{ "family": "mcmullen", "theta": 0.3, "method": "boxcount" }"#;
    run(dir.path(), &["dim", "--output", "one", "--threads", "1"], cfg);
    let input = dir.path().join("config.json");
    let out = bin().current_dir(dir.path()).env("SCHOTTKYDIM_THREADS", "3").args(["dim", "--output", "env", "--input"]).arg(&input).output().unwrap();
    assert!(out.status.success());
    for s in [".json", "_counts.csv"] {
        assert_eq!(fs::read(dir.path().join(format!("one{s}"))).unwrap(), fs::read(dir.path().join(format!("env{s}"))).unwrap());
    }
}

#[test]
fn embed_realizes_tree_kernel() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["embed", "--output", "e"], r#"{ "kernel": "tree", "matrix": [[0, 1, 2], [1, 0, 1], [2, 1, 0]], "s": 1.0 }"#);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(csv.contains("# rank 2"));
    let pts: Vec<Vec<f64>> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect()).collect();
    let b = |p: &[f64], q: &[f64]| p[0] * q[0] - p[1] * q[1] - p[2] * q[2];
    let d = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            let want = f64::exp(d[i][j]);
            assert!((b(&pts[i], &pts[j]) - want).abs() <= 1e-12 * want);
        }
    }
}

#[test]
fn align_reports_alignment() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{ "family": "mcmullen", "theta": 0.05, "tree": { "preset": "mcmullen_limit_tree_recentered" }, "l": 1, "subdivision": 1 }"#;
    let out = run(dir.path(), &["align", "--output", "a"], cfg);
    assert!(out.status.success());
    let r = &json(&dir.path().join("a.json"))["result"];
    assert_eq!(r["l"], 1);
    assert!(r["alignment_error"].as_f64().unwrap() < 0.25);
    assert!(r["kernel_gap"].as_f64().unwrap().is_finite());
}

#[test]
fn random_probe_is_seeded() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{ "family": "mcmullen", "theta": 0.3, "eps": [0.01], "depth": 8, "perturbation": { "kind": "random", "scale": 0.5 } }"#;
    for (name, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert!(run(dir.path(), &["probe-continuity", "--output", name, "--seed", seed], cfg).status.success());
    }
    let body = |n: &str| fs::read_to_string(dir.path().join(format!("{n}.csv"))).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body("a"), body("b"));
    assert_ne!(body("a"), body("c"));
}

#[test]
fn small_sweep_writes_all_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{ "family": "mcmullen", "theta_list": [0.2, 0.1], "l_max": 1, "depth": 6, "gap_l": 1 }"#;
    let out = run(dir.path(), &["mcmullen-sweep", "--output", "s"], cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(outputs(dir.path()), ["s.json", "s_ell.csv", "s_gap.csv", "s_headline.csv", "s_plot.csv"]);
    let v = json(&dir.path().join("s.json"));
    assert_eq!(v["result"]["headline"]["rows"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(dir.path().join("s_headline.csv")).unwrap().contains("# fit_intercept "));
}

#[test]
fn check_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["check", "--output", "c"], r#"{ "geometry_trials": 200, "kernel_trials": 50 }"#);
    assert!(matches!(out.status.code(), Some(0 | 3)));
    let v = json(&dir.path().join("c.json"));
    let geo = v["result"]["geometry"].as_array().unwrap();
    assert_eq!(geo.len(), 6);
    assert!(geo.iter().all(|r| r["passed"] == true && r["trials"] == 200));
    assert_eq!(v["result"]["kernels"].as_array().unwrap().len(), 6);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 12);
}
