use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uict(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uict"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Body lines below the `#` header.
fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn sample_path_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = uict(&[
            "sample-path", "--t", "100", "--l", "0", "--tau-max", "1", "--seed", "42",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# uict "));
    assert!(text.contains("# seed 42\n"));
    let rows = body(&text);
    assert_eq!(rows[0], "j,tau,k_raw,k_scaled,alpha_scaled");
    // floor(t tau_max) + 1 grid points, starting from one vertex.
    assert_eq!(rows.len() - 1, 101);
    assert!(rows[1].starts_with("0,0,1,"));

    let other = uict(&["sample-path", "--t", "100", "--seed", "43"]);
    assert_ne!(body(&stdout(&other)), rows);
}

#[test]
fn green_matches_the_bessel_form() {
    let o = uict(&["green", "--l1", "1", "--l2", "2", "--tau", "1", "--lambda", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value: f64 = body(&text)[0].parse().unwrap();
    // sqrt(2) e^-3 I1(2 sqrt 2), with I1 from an independent library.
    assert!((value - 0.238_463_438_486_297_1).abs() < 1e-12, "{value}");
    assert!(text.contains(r#""l1":1.0"#));

    let o = uict(&["green", "--l1", "1", "--l2", "2", "--format", "json"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["header"]["command"], "green");
    assert_eq!(doc["header"]["config"]["tau"], 1.0);
    assert!((doc["value"].as_f64().unwrap() - value).abs() < 1e-15);
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        &["sample-path", "--bogus", "1"][..],
        &["green", "--l2", "1"],
        &["green", "--l1", "0", "--l2", "1"],
        &["estimate", "--functional", "area", "--xi", "1"],
        &["estimate", "--functional", "volume"],
        &["sample-path", "--process", "diffusion", "--offspring", "geometric"],
        &["verify", "--suite", "12"],
        &["sample-tree", "--format", "csv"],
        &["pde", "--format", "json", "--stride", "3"],
    ] {
        let o = uict(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"t": 20, "tau-max": 0.5, "seed": 9}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = uict(&["sample-path", "--config", cfg]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# seed 9\n"));
    assert!(text.contains(r#""t":20"#) && text.contains(r#""tau-max":0.5"#));
    assert_eq!(body(&text).len() - 1, 11);

    let o = uict(&["sample-path", "--config", cfg, "--t", "40"]);
    assert_eq!(body(&stdout(&o)).len() - 1, 21);

    std::fs::write(dir.path().join("bad.json"), r#"{"l1": 1}"#).unwrap();
    let bad = dir.path().join("bad.json");
    let o = uict(&["sample-path", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(Path::new(cfg).exists());
}

#[test]
fn random_seed_is_reported() {
    let o = uict(&["sample-tree", "--h", "1"]);
    assert!(o.status.success());
    let stderr = String::from_utf8(o.stderr.clone()).unwrap();
    let seed = stderr.trim().strip_prefix("uict: seed ").expect("seed announced");
    assert!(stdout(&o).contains(&format!("# seed {seed}\n")));
}

#[test]
fn verify_cheap_suite() {
    let o = uict(&["verify", "--suite", "1,8", "--seed", "7", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["header"]["seed"], 7);
    assert_eq!(doc["report"]["pass"], true);
    assert_eq!(doc["report"]["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_output_ignores_worker_count() {
    let run = |w: &str| uict(&["verify", "--suite", "5", "--seed", "11", "--workers", w]).stdout;
    assert_eq!(run("1"), run("3"));
}

#[test]
fn failed_comparison_exits_with_3() {
    // Zero tolerance: any sampling error fails.
    let o = uict(&[
        "estimate", "--functional", "diffusion", "--l", "1", "--n", "100", "--k-sigma", "0", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("false"));
}
