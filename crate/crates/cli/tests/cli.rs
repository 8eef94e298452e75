use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cosearch"));
    c.env_remove("COSEARCH_PARALLEL");
    c
}

fn trend(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/trend").join(name)
}

const FAST: [&str; 4] = ["--num-sims", "50", "--max-depth", "10"];

#[test]
fn run_is_deterministic_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("t{i}.json"));
        let out = bin()
            .args(["run", "--agent", "cospomdp", "--seed", "3", "--scenario"])
            .arg(trend("trend-00.json"))
            .arg("--trace")
            .arg(&trace)
            .args(FAST)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(result["agent"], "cospomdp");
        assert_eq!(result["seed"], 3);
        outs.push((out.stdout, std::fs::read(&trace).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    let svg = dir.path().join("t.svg");
    let ok = bin()
        .args(["run", "--agent", "random", "--scenario"])
        .arg(trend("trend-01.json"))
        .arg("--trace")
        .arg(&trace)
        .status()
        .unwrap();
    assert!(ok.success());
    let ok = bin().args(["render", "--trace"]).arg(&trace).arg("--out").arg(&svg).status().unwrap();
    assert!(ok.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<circle"));
}

#[test]
fn bench_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scen");
    std::fs::create_dir(&scen).unwrap();
    for name in ["trend-00.json", "trend-01.json"] {
        std::fs::copy(trend(name), scen.join(name)).unwrap();
    }
    let out = dir.path().join("out");
    let res = bin()
        .args(["bench", "--trials", "2", "--parallel", "1", "--agents", "random,greedy-nbv", "--scenarios"])
        .arg(&scen)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = std::fs::read_to_string(out.join("results.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2 * 2 * 2);
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["success"].is_boolean());
        assert!(v.get("path_len").is_some());
    }
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("spl_mean"));
    assert!(csv.lines().any(|l| l.contains(",ALL,random,")));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("random") && stdout.contains("greedy-nbv"));
}

#[test]
fn unknown_agent_is_rejected() {
    let out = bin()
        .args(["run", "--agent", "oracle", "--scenario"])
        .arg(trend("trend-00.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}

#[test]
fn missing_scenario_fails_cleanly() {
    let out = bin().args(["run", "--agent", "random", "--scenario", "/nonexistent.json"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
