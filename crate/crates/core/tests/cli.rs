use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PATH3: &str = r#"{"schema_version": 1, "graph": {"generator": {"kind": "path", "n": 3}}, "envelope": {"mode": "doeblin"}}"#;

const SMALL_FIT: &str = r#"{
  "schema_version": 1,
  "graph": {"generator": {"kind": "erdos_renyi", "n": 10, "p": 0.5, "seed": 3}},
  "traps": {"nodes": "all", "zeta": 0.05},
  "policy": {"A_l": 0, "q_fork": 0.2},
  "envelope": {"mode": "fit", "samples_per_node": 2000, "seed": 4},
  "simulation": {"Z_0": 10, "horizon": 300, "replicas": 3, "seed": 8, "Z_cap": 2000}
}"#;

fn srrw(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_srrw"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("SRRW_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Runs a command and returns the run directory it reports.
fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> PathBuf {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = srrw(&args, threads);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(String::from_utf8(o.stdout).unwrap().trim())
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn stationary_on_path3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "p.json", PATH3);
    let dir = run_ok("stationary", &cfg, tmp.path(), &[], None);
    let pi = fs::read_to_string(dir.join("pi.csv")).unwrap();
    let rows = csv_rows(&pi);
    assert_eq!(rows[0], ["node", "pi", "degree"]);
    let probs: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(probs, [0.25, 0.5, 0.25]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("stationary.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with(&doc["meta"]["config_hash"].as_str().unwrap()[..8]));
    assert!(dir.join("config.resolved.json").exists());
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", SMALL_FIT);
    for cmd in ["stationary", "envelopes", "simulate"] {
        let a = run_ok(cmd, &cfg, &tmp.path().join("a"), &[], Some("1"));
        let b = run_ok(cmd, &cfg, &tmp.path().join("b"), &[], Some("4"));
        assert_eq!(files(&a), files(&b), "{cmd} artifacts differ");
    }
}

#[test]
fn seed_and_replica_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", SMALL_FIT);
    let dir = run_ok("simulate", &cfg, tmp.path(), &["--seed", "77", "--replicas", "2"], None);
    let names: Vec<String> = files(&dir).into_iter().map(|f| f.0).collect();
    assert!(names.contains(&"trace_r1.csv".to_string()) && !names.contains(&"trace_r2.csv".to_string()));
    let trace = fs::read_to_string(dir.join("trace_r0.csv")).unwrap();
    assert!(trace.starts_with("# config_hash="), "{trace}");
    assert!(trace.lines().next().unwrap().contains("seed=77"));
    assert_eq!(trace.lines().nth(1), Some("t,Z,forks,trap_dels,terms"));
}

#[test]
fn envelope_curve_starts_at_one_and_is_ordered() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", SMALL_FIT);
    let dir = run_ok("envelopes", &cfg, tmp.path(), &[], None);
    let rows = csv_rows(&fs::read_to_string(dir.join("envelope_curve.csv")).unwrap());
    assert_eq!(rows[0], ["A", "L_plus", "L_minus"]);
    assert_eq!(rows[1], ["0", "1", "1"]);
    for r in &rows[1..] {
        let (lp, lm): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(lp <= lm);
    }
    assert!(dir.join("return_tails.csv").exists());
}

#[test]
fn one_point_sweep_matches_check() {
    let tmp = TempDir::new().unwrap();
    let with_sweep = SMALL_FIT.trim_end().trim_end_matches('}').to_string() + r#", "sweep": {"q": [0.2]}}"#;
    let cfg = write_config(&tmp, "s.json", &with_sweep);
    let check = run_ok("check", &cfg, tmp.path(), &[], None);
    let sweep = run_ok("sweep", &cfg, tmp.path(), &[], None);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(check.join("feasibility.json")).unwrap()).unwrap();
    let rows = csv_rows(&fs::read_to_string(sweep.join("sweep.csv")).unwrap());
    assert_eq!(rows.len(), 2);
    let col = |name: &str| rows[0].iter().position(|h| h == name).unwrap();
    let rep = &doc["regimes"][0]["with_measured"];
    let v: f64 = rows[1][col("viability_lhs")].parse().unwrap();
    let s: f64 = rows[1][col("safety_lhs")].parse().unwrap();
    assert_eq!(v, rep["viability_lhs"].as_f64().unwrap());
    assert_eq!(s, rep["safety_lhs"].as_f64().unwrap());
    assert_eq!(rows[1][col("viable")], rep["viable"].to_string());
}

#[test]
fn sweep_has_one_row_per_grid_point_and_a_monotone_frontier() {
    let tmp = TempDir::new().unwrap();
    let with_sweep =
        SMALL_FIT.trim_end().trim_end_matches('}').to_string() + r#", "sweep": {"q": [0.1, 0.2], "zeta_scale": [0.5, 1, 2, 4, 8]}}"#;
    let cfg = write_config(&tmp, "s.json", &with_sweep);
    let dir = run_ok("sweep", &cfg, tmp.path(), &[], None);
    let rows = csv_rows(&fs::read_to_string(dir.join("sweep.csv")).unwrap());
    assert_eq!(rows.len(), 1 + 10);
    let viable = rows[0].iter().position(|h| h == "viable").unwrap();
    for q_rows in rows[1..].chunks(5) {
        let flips = q_rows.windows(2).filter(|w| w[0][viable] != w[1][viable]).count();
        assert!(flips <= 1, "{q_rows:?}");
        assert!(q_rows.windows(2).all(|w| !(w[0][viable] == "false" && w[1][viable] == "true")));
    }
}

#[test]
fn config_errors_exit_1_with_location() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let bad = write_config(&tmp, "bad.json", "{\"schema_version\": 1,\n \"graph\": {\"generator\": {\"kind\": \"path\", \"n\": 3}},\n \"lazyness\": 0.5}");
    let o = srrw(&["stationary", "--config", bad.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lazyness") && err.contains("line 3"), "{err}");

    let disc = write_config(
        &tmp,
        "disc.json",
        r#"{"schema_version": 1, "graph": {"generator": {"kind": "erdos_renyi", "n": 12, "p": 0.05, "seed": 3}}}"#,
    );
    let o = srrw(&["stationary", "--config", disc.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("components"));

    let o = srrw(&["stationary", "--config", "/nonexistent.json", "--out", out], None);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(&tmp, "p.json", PATH3);
    let o = srrw(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(1), "sweep without a grid");

    let o = srrw(&["stationary", "--config", cfg.to_str().unwrap(), "--out", out], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_without_surviving_tokens_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "c.json", &SMALL_FIT.replace("\"zeta\": 0.05", "\"zeta\": 1.0"));
    let o = srrw(&["check", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = srrw(&["envelopes", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oversized_dense_computation_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "big.json", r#"{"schema_version": 1, "graph": {"generator": {"kind": "cycle", "n": 2500}}}"#);
    let o = srrw(&["stationary", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
