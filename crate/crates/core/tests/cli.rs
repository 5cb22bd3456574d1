use std::path::Path;
use std::process::{Command, Output};

fn lsvee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsvee")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate(dir: &Path, name: &str, seed: &str) -> (String, String) {
    let cdp = dir.join(format!("{name}_cdp.json")).display().to_string();
    let class = dir.join(format!("{name}_class.json")).display().to_string();
    let out = lsvee(&[
        "generate", "--generator", "random", "--m", "2", "--k", "2", "--h", "2", "--n", "4", "--env-seed", seed,
        "--out-cdp", &cdp, "--out-class", &class,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (cdp, class)
}

#[test]
fn generate_validate_oracle_run() {
    let dir = tempfile::tempdir().unwrap();
    let (cdp, class) = generate(dir.path(), "a", "3");
    assert_eq!(code(&lsvee(&["validate", "--cdp", &cdp, "--class", &class])), 0);

    let out = lsvee(&["oracle", "--cdp", &cdp, "--class", &class]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rootValue"].as_f64().is_some());

    let results = dir.path().join("out");
    let out = lsvee(&["run", "--cdp", &cdp, "--class", &class, "--seeds", "0..2", "--out", results.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
    assert!(results.join("results.csv").exists());
    assert!(results.join("run_0.json").exists());
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"env":{"generator":"random","m":2,"k":2,"h":2,"n":3},"algo":{"epsilon":2.0},"seeds":[0]}"#).unwrap();
    assert_eq!(code(&lsvee(&["run", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&lsvee(&["run", "--generator", "random", "--seeds", "x..y"])), 2);
    assert_eq!(code(&lsvee(&["oracle", "--cdp", "/nonexistent/cdp.json"])), 2);
}

#[test]
fn exhausted_budget_on_every_seed_exits_with_3() {
    let out = lsvee(&["run", "--generator", "random", "--m", "2", "--h", "2", "--n", "4", "--budget", "50", "--seeds", "0,1,2"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("budgetExceeded"));
}

#[test]
fn mismatched_class_fails_validation_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let (cdp, _) = generate(dir.path(), "a", "3");
    let (_, other_class) = generate(dir.path(), "b", "4");
    let out = lsvee(&["validate", "--cdp", &cdp, "--class", &other_class]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn baseline_subcommand_runs() {
    let out = lsvee(&["baseline", "--generator", "random", "--m", "2", "--h", "2", "--n", "4", "--method", "enumerateAll"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("enumerateAll"));
    assert_eq!(code(&lsvee(&["baseline", "--generator", "random", "--method", "nope"])), 2);
}
