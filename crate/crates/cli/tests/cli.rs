use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ccmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccmdp")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_counterexample_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ccmdp(&["solve", "--model", "builtin:appendix", "--problem", "1", "--delta", "0.5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sol = json(&out.join("solution.json"));
    assert!((sol["optimum"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert_eq!(sol["status"], "optimal");
    assert!(sol["occupation_measure"].is_object());
    let pol = json(&out.join("policy.json"));
    assert_eq!(pol["mode"], "binary");
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "solve");
    assert_eq!(m["config"]["deltas"][0].as_f64(), Some(0.5));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 3, "no temporary files left behind");
}

#[test]
fn infeasible_bound_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccmdp(&["solve", "--model", "builtin:appendix", "--problem", "1", "--delta", "0.1", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("0.250000"), "{}", stderr(&o));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn malformed_and_invalid_models_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"num_states\": 2,\n  \"num_actions\": }").unwrap();
    let o = ccmdp(&["solve", "--model", s(&bad), "--problem", "1", "--delta", "0.5"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let invalid = dir.path().join("invalid.json");
    let mdp = serde_json::json!({
        "num_states": 2, "num_actions": 1, "horizon": 1,
        "transition": [[[0.5, 0.4]], [[0.0, 1.0]]],
        "rewards": [[[0.0], [0.0]]],
        "terminal_reward": [0.0, 1.0],
        "alarm_states": [1],
        "initial_state": 0
    });
    fs::write(&invalid, mdp.to_string()).unwrap();
    let o = ccmdp(&["validate", "--model", s(&invalid)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"ok\": false"));
    let o = ccmdp(&["solve", "--model", s(&invalid), "--problem", "1", "--delta", "0.5"]);
    assert_eq!(code(&o), 3);

    let o = ccmdp(&["validate", "--model", "builtin:section5"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn usage_errors_exit_with_1() {
    assert_eq!(code(&ccmdp(&["frobnicate"])), 1);
    assert_eq!(code(&ccmdp(&["solve", "--model", "builtin:appendix", "--problem", "3", "--delta", "0.5"])), 1);
    assert_eq!(code(&ccmdp(&["--help"])), 0);
}

#[test]
fn verify_reports_pass_and_rejects_unknown_suites() {
    let o = ccmdp(&["verify", "appendix"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("=> PASS"));
    assert_eq!(code(&ccmdp(&["verify", "nonsense"])), 3);
}

#[test]
fn solve_then_simulate_is_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solve");
    let o = ccmdp(&["solve", "--model", "builtin:section5", "--problem", "1", "--delta", "0.5", "--out", s(&solved)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let optimum = json(&solved.join("manifest.json"))["optimum"].as_f64().unwrap();
    let policy = solved.join("policy.json");

    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ccmdp(&["simulate", "--model", "builtin:section5", "--policy", s(&policy), "--seed", "0", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let a = run("sim_a");
    let b = run("sim_b");
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["config"]["trajectories"], 100_000);
    let mean = m["mean_reward"].as_f64().unwrap();
    assert!((mean - optimum).abs() <= 0.01 * optimum, "{mean} vs {optimum}");
    for f in ["alarm_pmf.csv", "paths.csv", "conditional_means.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let paths = fs::read_to_string(a.join("paths.csv")).unwrap();
    let rows: Vec<&str> = paths.lines().skip(1).collect();
    assert_eq!(rows.len(), 100 * 16);
    assert!(rows.last().unwrap().starts_with("99,15,"));

    let pmf = fs::read_to_string(a.join("alarm_pmf.csv")).unwrap();
    assert!(pmf.starts_with("count,probability\n"));
    let p_any: f64 = pmf
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!(p_any <= 0.5 + 3.0 * (0.25f64 / 1e5).sqrt(), "{p_any}");
}

#[test]
fn replay_reproduces_outputs_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = ccmdp(&[
        "solve", "--model", "builtin:section5", "--problem", "2", "--deltas", "geometric:0.5", "--tol", "1e-9", "--out",
        s(&first),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let second = dir.path().join("second");
    let o = ccmdp(&["replay", s(&first.join("manifest.json")), "--out", s(&second)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["solution.json", "policy.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let m1 = json(&first.join("manifest.json"));
    let m2 = json(&second.join("manifest.json"));
    assert_eq!(m1["config"], m2["config"]);
    assert_eq!(m1["optimum"], m2["optimum"]);
}

#[test]
fn policy_for_another_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccmdp(&["solve", "--model", "builtin:appendix", "--problem", "1", "--delta", "0.5", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let o = ccmdp(&[
        "simulate", "--model", "builtin:section5", "--policy", s(&dir.path().join("policy.json")), "--trajectories", "10",
        "--out", s(&dir.path().join("sim")),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn exported_lp_solves_to_the_same_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("counterexample.lp");
    let o = ccmdp(&["export-lp", "--model", "builtin:appendix", "--problem", "1", "--delta", "0.5", "--out", s(&lp)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = ccmdp(&["solve-lp", s(&lp)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sol: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((sol["objective"].as_f64().unwrap() - 4.0).abs() < 1e-9);

    let o = ccmdp(&["export-lp", "--model", "builtin:appendix", "--problem", "1", "--delta", "0.1", "--out", s(&lp)]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&ccmdp(&["solve-lp", s(&lp)])), 2);
}

#[test]
fn compose_writes_a_valid_mdp() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("detector.json");
    let model = serde_json::json!({
        "plant": {
            "plant_states": 2,
            "actions": 2,
            "kernel": [[[0.5, 0.5], [1.0, 0.0]], [[0.0, 1.0], [0.9, 0.1]]],
            "outputs": [0.0, 1.0],
            "nominal_outputs": [0.0, 0.0, 0.0],
            "initial_state": 0
        },
        "detector": {"kind": "cusum", "bias": 0.25, "threshold": 0.5, "grid": [0.0, 0.25, 0.5, 0.75]},
        "rewards": {"stage": [[0.0, 0.0], [1.0, 1.0]], "terminal": [0.0, 1.0]}
    });
    fs::write(&spec, model.to_string()).unwrap();
    let out = dir.path().join("mdp.json");
    let o = ccmdp(&["compose", s(&spec), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&ccmdp(&["validate", "--model", s(&out)])), 0);
    let o = ccmdp(&["solve", "--model", s(&out), "--problem", "1", "--delta", "0.3", "--out", s(&dir.path().join("run"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
