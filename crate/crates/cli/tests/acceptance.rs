//! Acceptance criteria 1 to 9, run through the `schottkydim` binary.
//!
//! The whole battery runs three times: once with one thread, then twice with
//! eight. Criteria 1 to 8 are judged on the first run; criterion 9 compares
//! every output file of the three runs byte for byte. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

const TWO_LOG2: f64 = 2.0 * std::f64::consts::LN_2;
const HALF_LOG2: f64 = 0.5 * std::f64::consts::LN_2;

struct Job {
    name: &'static str,
    command: &'static str,
    config: String,
    args: Vec<&'static str>,
}

fn job(name: &'static str, command: &'static str, config: impl Into<String>, args: &[&'static str]) -> Job {
    Job { name, command, config: config.into(), args: args.to_vec() }
}

fn jobs() -> Vec<Job> {
    let mut v = vec![job("tree", "tree-dim", r#"{ "preset": "mcmullen_limit_tree", "depth": 12 }"#, &[])];
    for (name, c) in [("rose_0.5", 0.5), ("rose_1", 1.0), ("rose_2", 2.0)] {
        v.push(job(name, "tree-dim", format!(r#"{{ "preset": "rose", "lengths": [{c}, {c}], "depth": 10 }}"#), &["--tol", "1e-12"]));
    }
    v.push(job(
        "sweep",
        "mcmullen-sweep",
        r#"{ "family": "mcmullen", "theta_list": [0.2, 0.1, 0.05, 0.02, 0.01], "s": 1.0, "l_max": 4, "eps0": 0.5, "depth": 12 }"#,
        &[],
    ));
    for theta in ["0.3", "0.1"] {
        let name = if theta == "0.3" { "pressure_0.3" } else { "pressure_0.1" };
        v.push(job(name, "dim", format!(r#"{{ "family": "mcmullen", "theta": {theta}, "depth": 12 }}"#), &[]));
        let name = if theta == "0.3" { "boxcount_0.3" } else { "boxcount_0.1" };
        v.push(job(name, "dim", format!(r#"{{ "family": "mcmullen", "theta": {theta}, "method": "boxcount", "sample_depth": 10, "scales": 16 }}"#), &[]));
    }
    v.push(job(
        "bowen",
        "probe-continuity",
        r#"{ "family": "mcmullen", "theta": 0.3, "eps": [0.1, 0.01, 0.001], "depth": 12,
             "perturbation": { "kind": "generators", "matrices": [
                 [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
                 [[0, 0, 0.5], [0, 0, -1], [0.5, 1, 0]] ] } }"#,
        &[],
    ));
    v.push(job(
        "conjugation",
        "probe-continuity",
        r#"{ "family": "mcmullen", "theta": 0.3, "eps": [0.1, 0.01, 0.001], "depth": 12,
             "perturbation": { "kind": "conjugation", "matrix": [[0, 0.7, -0.3], [0.7, 0, -0.4], [-0.3, 0.4, 0]] } }"#,
        &[],
    ));
    v.push(job("check", "check", r#"{ "geometry_trials": 10000, "kernel_trials": 1000 }"#, &["--seed", "2024"]));
    v.push(job(
        "degeneration",
        "mcmullen-sweep",
        r#"{ "family": "mcmullen", "theta_list": [0.2, 0.1, 0.05, 0.02], "s": 1.0, "l_max": 4, "eps0": 0.5, "depth": 8, "gap_l": 2 }"#,
        &[],
    ));
    v
}

struct Ran {
    code: Option<i32>,
    elapsed: Duration,
    stderr: String,
}

struct Battery {
    dir: PathBuf,
    ran: BTreeMap<&'static str, Ran>,
}

impl Battery {
    fn run(root: &Path, label: &str, threads: usize) -> Self {
        let dir = root.join(label);
        fs::create_dir_all(&dir).unwrap();
        let mut ran = BTreeMap::new();
        for j in jobs() {
            let input = dir.join(format!("{}.input.json", j.name));
            fs::write(&input, &j.config).unwrap();
            let t0 = Instant::now();
            let out = Command::new(env!("CARGO_BIN_EXE_schottkydim"))
                .arg(j.command)
                .arg("--input")
                .arg(&input)
                .arg("--output")
                .arg(dir.join(j.name))
                .arg("--threads")
                .arg(threads.to_string())
                .args(&j.args)
                .output()
                .expect("binary runs");
            let elapsed = t0.elapsed();
            ran.insert(j.name, Ran { code: out.status.code(), elapsed, stderr: String::from_utf8_lossy(&out.stderr).into_owned() });
        }
        Self { dir, ran }
    }

    fn ok(&self, name: &str) -> Result<&Ran, String> {
        let r = &self.ran[name];
        match r.code {
            Some(0) => Ok(r),
            c => Err(format!("{name} exited with {c:?}: {}", r.stderr.trim())),
        }
    }

    fn json(&self, file: &str) -> Result<Value, String> {
        let text = fs::read_to_string(self.dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        Ok(serde_json::from_str::<Value>(&text).map_err(|e| format!("{file}: {e}"))?["result"].clone())
    }

    /// Data rows of a CSV output keyed by column name.
    fn csv(&self, file: &str) -> Result<Vec<BTreeMap<String, f64>>, String> {
        let text = fs::read_to_string(self.dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let cols: Vec<String> = lines.next().ok_or("empty csv")?.split(',').map(String::from).collect();
        Ok(lines.map(|l| cols.iter().cloned().zip(l.split(',').map(|x| x.parse().unwrap_or(f64::NAN))).collect()).collect())
    }

    fn note(&self, file: &str, key: &str) -> Result<f64, String> {
        let text = fs::read_to_string(self.dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let prefix = format!("# {key} ");
        text.lines().find_map(|l| l.strip_prefix(&prefix)).and_then(|v| v.parse().ok()).ok_or(format!("{file}: no {key}"))
    }

    fn files(&self) -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(&self.dir)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
            .collect()
    }
}

fn pressure_delta(b: &Battery, name: &str) -> Result<f64, String> {
    b.ok(name)?;
    b.json(&format!("{name}.json"))?["pressure"]["delta"].as_f64().ok_or(format!("{name}: no delta"))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

type Verdict = Result<String, String>;
type Criterion = (u32, fn(&Battery) -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    if pass { Ok(detail) } else { Err(detail) }
}

fn criterion_1(b: &Battery) -> Verdict {
    let delta = pressure_delta(b, "tree")?;
    let secs = b.ran["tree"].elapsed.as_secs_f64();
    verdict((delta - TWO_LOG2).abs() <= 1e-3 && secs < 10.0, format!("delta = {delta:.7} (target {TWO_LOG2:.7} ± 1e-3), {secs:.2} s"))
}

fn criterion_2(b: &Battery) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, c) in [("rose_0.5", 0.5), ("rose_1", 1.0), ("rose_2", 2.0)] {
        let delta = pressure_delta(b, name)?;
        let err = (delta - 3f64.ln() / c).abs();
        let secs = b.ran[name].elapsed.as_secs_f64();
        pass &= err <= 1e-6 && secs < 5.0;
        parts.push(format!("c = {c}: error {err:.1e} in {secs:.2} s"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_3(b: &Battery) -> Verdict {
    let ran = b.ok("sweep")?;
    let rows = b.csv("sweep_headline.csv")?;
    let dev: Vec<f64> = rows.iter().map(|r| r["deviation"]).collect();
    let intercept = b.note("sweep_headline.csv", "fit_intercept")?;
    let a = strictly_decreasing(&dev);
    let rel = (intercept - HALF_LOG2).abs() / HALF_LOG2;
    let secs = ran.elapsed.as_secs_f64();
    let detail = format!(
        "(a) {} |r·δ − 2 log 2| = {}; (b) {} intercept {intercept:.6}, {:.1}% from {HALF_LOG2:.7}; {secs:.1} s",
        if a { "PASS" } else { "FAIL" },
        dev.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", "),
        if rel <= 0.05 { "PASS" } else { "FAIL" },
        100.0 * rel,
    );
    verdict(a && rel <= 0.05 && secs < 300.0, detail)
}

fn criterion_4(b: &Battery) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for theta in ["0.3", "0.1"] {
        let p = pressure_delta(b, &format!("pressure_{theta}"))?;
        let name = format!("boxcount_{theta}");
        b.ok(&name)?;
        let bc = b.json(&format!("{name}.json"))?;
        let (d, r2) = (bc["boxcount"]["delta"].as_f64().unwrap_or(f64::NAN), bc["boxcount"]["fit_r2"].as_f64().unwrap_or(f64::NAN));
        pass &= (p - d).abs() <= 0.05 && r2 >= 0.99;
        parts.push(format!("θ = {theta}: pressure {p:.5}, box {d:.5}, r² {r2:.4}"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_5(b: &Battery) -> Verdict {
    b.ok("bowen")?;
    b.ok("conjugation")?;
    let gen = b.csv("bowen.csv")?;
    let dev: Vec<f64> = gen.iter().filter(|r| r["eps"] != 0.0).map(|r| r["deviation"]).collect();
    let conj = b.csv("conjugation.csv")?;
    let conj_ok = conj.iter().all(|r| r["deviation"] <= r["bracket_width"]);
    let worst = conj.iter().map(|r| r["deviation"]).fold(0.0, f64::max);
    verdict(
        strictly_decreasing(&dev) && dev.len() == 3 && conj_ok,
        format!("generator deviations {}; conjugation worst {worst:.1e} within bracket: {conj_ok}", dev.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")),
    )
}

fn check_rows(b: &Battery, part: &str) -> Result<Vec<Value>, String> {
    let r = &b.ran["check"];
    if !matches!(r.code, Some(0 | 3)) {
        return Err(format!("check exited with {:?}: {}", r.code, r.stderr.trim()));
    }
    Ok(b.json("check.json")?[part].as_array().cloned().unwrap_or_default())
}

fn summarize(rows: &[Value]) -> (bool, String) {
    let pass = !rows.is_empty() && rows.iter().all(|r| r["passed"] == true);
    let detail = rows
        .iter()
        .map(|r| format!("{} {}/{} worst {:.1e}", r["name"].as_str().unwrap_or("?"), r["failures"], r["trials"], r["worst"].as_f64().unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn criterion_6(b: &Battery) -> Verdict {
    let rows = check_rows(b, "geometry")?;
    let (pass, detail) = summarize(&rows);
    let full = rows.iter().all(|r| r["trials"] == 10_000);
    let secs = b.ran["check"].elapsed.as_secs_f64();
    verdict(pass && full && secs < 30.0, format!("{detail}; {secs:.2} s"))
}

fn criterion_7(b: &Battery) -> Verdict {
    let rows = check_rows(b, "kernels")?;
    let (pass, detail) = summarize(&rows);
    verdict(pass, detail)
}

fn criterion_8(b: &Battery) -> Verdict {
    b.ok("degeneration")?;
    let gaps: Vec<f64> = b.csv("degeneration_gap.csv")?.iter().map(|r| r["kernel_gap"]).collect();
    let ell = b.json("degeneration.json")?["ell"].as_array().cloned().unwrap_or_default();
    let ells: Vec<u64> = ell.iter().filter_map(|r| r["ell"].as_u64()).collect();
    let finite = ells.len() == 4 && ell.iter().all(|r| r["reports"].as_array().is_some_and(|v| v.len() == 5));
    let mono = ells.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        strictly_decreasing(&gaps) && gaps.len() == 4 && mono && finite,
        format!("kernel gaps {}; ℓ(θ) = {ells:?}", gaps.iter().map(|g| format!("{g:.1}")).collect::<Vec<_>>().join(", ")),
    )
}

fn criterion_9(runs: &[Battery]) -> Verdict {
    let files: Vec<BTreeMap<String, Vec<u8>>> = runs.iter().map(Battery::files).collect();
    let mut diffs = Vec::new();
    for (k, other) in files.iter().enumerate().skip(1) {
        if other.keys().ne(files[0].keys()) {
            diffs.push(format!("run {k}: different file set"));
        }
        for (name, bytes) in &files[0] {
            if other.get(name) != Some(bytes) {
                diffs.push(format!("run {k}: {name}"));
            }
        }
    }
    verdict(diffs.is_empty(), if diffs.is_empty() { format!("{} files identical across 1, 8 and 8 threads", files[0].len()) } else { diffs.join(", ") })
}

fn main() -> ExitCode {
    let root = TempDir::new().unwrap();
    let first = Battery::run(root.path(), "threads1", 1);
    let criteria: [Criterion; 8] = [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6), (7, criterion_7), (8, criterion_8)];
    let mut failed = 0;
    let mut report = |k: u32, v: Verdict| {
        let (mark, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {k}: {mark}  {detail}");
    };
    for (k, f) in criteria {
        report(k, f(&first));
    }
    let runs = [first, Battery::run(root.path(), "threads8a", 8), Battery::run(root.path(), "threads8b", 8)];
    report(9, criterion_9(&runs));
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
