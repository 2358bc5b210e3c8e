use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toolsmith"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn gen(preset: &str, dir: &Path) -> PathBuf {
    let out = run(&["gen", "--preset", preset, "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("scenario.json")
}

#[test]
fn missing_scenario_exits_2_and_names_the_path() {
    let out = run(&["rank", "/no/such/dir/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("/no/such/dir/scenario.json"));
}

#[test]
fn fit_on_five_points_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("five.ply");
    let mut text = String::from(
        "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
    );
    for i in 0..5 {
        text.push_str(&format!("{} {} {}\n", i as f64 * 0.01, (i * i) as f64 * 0.01, 0.02));
    }
    fs::write(&p, text).unwrap();
    let out = run(&["fit", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fit_is_deterministic_and_reports_parameters() {
    let dir = tempfile::tempdir().unwrap();
    gen("hammer", dir.path());
    let ply = dir.path().join("ref_handle.ply");
    let a = run(&["fit", ply.to_str().unwrap(), "--json", "--seed", "9"]);
    let b = run(&["fit", ply.to_str().unwrap(), "--json", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["points"], 1000);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["params"]["scale"].as_array().unwrap().len(), 3);
    assert!(v["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn rank_hammer_lists_twelve_builds() {
    let dir = tempfile::tempdir().unwrap();
    let sc = gen("hammer", dir.path());
    let v = stdout_json(&run(&["rank", sc.to_str().unwrap(), "--json"]));
    assert_eq!(v["builds"].as_array().unwrap().len(), 12);
    assert_eq!(v["weights"], serde_json::json!([1.0, 1.0, 5.0, 5.0]));

    let table = run(&["rank", sc.to_str().unwrap()]);
    let text = String::from_utf8(table.stdout).unwrap();
    let rows = text
        .lines()
        .filter(|l| l.trim_start().chars().next().is_some_and(|c| c.is_ascii_digit()))
        .count();
    assert_eq!(rows, 12);
}

#[test]
fn attachment_only_weights_put_the_bare_scoop_last() {
    let dir = tempfile::tempdir().unwrap();
    let sc = gen("spoon", dir.path());
    let v = stdout_json(&run(&["rank", sc.to_str().unwrap(), "--weights", "0,0,0,1", "--json"]));
    let builds = v["builds"].as_array().unwrap();
    let has_c: Vec<bool> = builds
        .iter()
        .map(|b| b["parts"].as_array().unwrap().iter().any(|p| p == "C"))
        .collect();
    let first = has_c.iter().position(|&x| x).unwrap();
    assert!(has_c[first..].iter().all(|&x| x));
    for (b, &c) in builds.iter().zip(&has_c) {
        assert_eq!(b["e_const"] == "inf", c);
    }
}

#[test]
fn simulate_prints_the_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let sc = gen("spoon", dir.path());
    let out = run(&["simulate", sc.to_str().unwrap(), "--unknown-attachments"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("solution at rank 4 after 14 attempts"), "{text}");

    let hammer = gen("hammer", &dir.path().join("h"));
    let out = run(&["simulate", hammer.to_str().unwrap()]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("solution at rank 2 after 2 attempts"));
}

#[test]
fn unsolvable_world_exits_0_with_null_solution() {
    let dir = tempfile::tempdir().unwrap();
    let sc = gen("hammer", dir.path());
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&sc).unwrap()).unwrap();
    v["world"]["task"]["min_grasp_length"] = 10.0.into();
    fs::write(&sc, v.to_string()).unwrap();
    let out = stdout_json(&run(&["simulate", sc.to_str().unwrap(), "--json"]));
    assert!(out["log"]["solution"].is_null());
    assert_eq!(out["log"]["total_attempts"], 12);
    assert_eq!(out["summary"], "no solution after 12 attempts");
}

#[test]
fn config_file_sets_weights_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let sc = gen("hammer", dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"weights": [2, 2, 10, 10], "seed": 4}"#).unwrap();
    let v = stdout_json(&run(&[
        "rank",
        sc.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--json",
    ]));
    assert_eq!(v["weights"], serde_json::json!([2.0, 2.0, 10.0, 10.0]));
    assert_eq!(v["seed"], 4);

    fs::write(&cfg, r#"{"wieghts": [1, 1, 5, 5]}"#).unwrap();
    let out = run(&["rank", sc.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_is_byte_identical_and_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    gen("spatula", &dir.path().join("a"));
    gen("spatula", &dir.path().join("b"));
    for f in fs::read_dir(dir.path().join("a")).unwrap() {
        let name = f.unwrap().file_name();
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"name": "x", "seed": 1, "colour": "red"}"#).unwrap();
    let out = run(&[
        "gen",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segment_splits_the_generated_scene() {
    let dir = tempfile::tempdir().unwrap();
    gen("hammer", dir.path());
    let parts = dir.path().join("parts");
    let v = stdout_json(&run(&[
        "segment",
        dir.path().join("scene.ply").to_str().unwrap(),
        "--out",
        parts.to_str().unwrap(),
        "--json",
    ]));
    assert_eq!(v["parts"].as_array().unwrap().len(), 4);
    assert!(parts.join("part_3.ply").exists());
}

#[test]
fn classify_reports_the_nine_examples() {
    let v = stdout_json(&run(&["classify", "--json"]));
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 9);
    assert_eq!(results[2]["classification"]["level"], "OA_eq");

    let dir = tempfile::tempdir().unwrap();
    let req = dir.path().join("req.json");
    fs::write(
        &req,
        r#"{"goal": {"predicate": "isAttached", "satisfied_by": ["bound_together"]},
            "reference": {"object": "rope", "action": "tie", "effect": "bound_together"},
            "candidates": [{"object": "tape", "action": "wrap", "effect": "bound_together"},
                           {"object": "glue", "action": "spread", "effect": "stuck"}]}"#,
    )
    .unwrap();
    let v = stdout_json(&run(&["classify", req.to_str().unwrap(), "--json"]));
    assert_eq!(v["results"][0]["classification"]["level"], "OA_eq");
    assert!(v["results"][1]["error"].as_str().unwrap().contains("stuck"));
}
