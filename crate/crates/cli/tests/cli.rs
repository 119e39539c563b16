use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relloc")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = "schema_version = 1\nn_robots = 4\niterations = 12\ntrials = 2\nseed = 5\n";

#[test]
fn simulate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = relloc(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for t in 0..2 {
        for name in [format!("truth_{t}.csv"), format!("est_{t}.csv"), format!("graphs_{t}.jsonl")] {
            assert!(out.join(&name).is_file(), "{name}");
        }
    }
    let header = fs::read_to_string(out.join("est_0.csv")).unwrap();
    assert!(header.starts_with("t,robot,x,y,phi\n0,0,0.0,0.0,0.0\n"));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["summary"]["solve_ms_mean"].as_f64().unwrap() > 0.0);
    assert_eq!(metrics["trials"].as_array().unwrap().len(), 2);

    let trace = out.join("graphs_0.jsonl");
    let v = relloc(&["validate-network", "--trace", trace.to_str().unwrap(), "--xi", "0.1", "--T", "1"]);
    let report: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["doubly_stochastic"], true);
    let strict = relloc(&["validate-network", "--trace", trace.to_str().unwrap(), "--xi", "0.9", "--T", "1"]);
    assert_eq!(strict.status.code(), Some(1));

    for (format, file) in [("csv", "trajectories.csv"), ("json", "trajectories.json")] {
        let e = relloc(&["export", "--result", out.to_str().unwrap(), "--format", format]);
        assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
        assert!(out.join(file).is_file());
    }
    let joined = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert_eq!(joined.lines().count(), 1 + 2 * 13 * 4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["schema_version = 1\nn_robots = 1\n", "schema_version = 9\n", "not toml at all ["] {
        let cfg = write_config(dir.path(), body);
        let o = relloc(&["simulate", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!dir.path().join("x").exists());
    }
    let missing = relloc(&["simulate", "--config", "/nonexistent.toml", "--out", "/tmp/unused"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn optimize_round_trips_a_problem() {
    let dir = tempfile::tempdir().unwrap();
    let problem = r#"{
      "vertices": [{"x": 0.0, "y": 0.0, "phi": 0.0}, {"x": 2.5, "y": 0.7, "phi": 0.2}, {"x": 0.4, "y": 3.6, "phi": -0.1}],
      "odom_factors": [
        {"robot": 1, "origin": {"x": 3.0, "y": 0.0, "phi": 0.0}, "motion": {"x": 0.0, "y": 0.0, "phi": 0.0},
         "information": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
        {"robot": 2, "origin": {"x": 0.0, "y": 4.0, "phi": 0.0}, "motion": {"x": 0.0, "y": 0.0, "phi": 0.0},
         "information": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]}
      ],
      "range_factors": [
        {"i": 0, "j": 1, "distance": 3.0, "information": 1.0},
        {"i": 0, "j": 2, "distance": 4.0, "information": 1.0},
        {"i": 1, "j": 2, "distance": 5.0, "information": 1.0}
      ],
      "anchor": 0
    }"#;
    let p = dir.path().join("problem.json");
    fs::write(&p, problem).unwrap();
    let out = dir.path().join("solution.json");
    let o = relloc(&["optimize", "--problem", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(g["final_chi2"].as_f64().unwrap() < 1e-12);
    assert!((g["vertices"][1]["x"].as_f64().unwrap() - 3.0).abs() < 1e-6);

    fs::write(&p, r#"{"vertices": [], "odom_factors": [], "range_factors": [], "anchor": 4}"#).unwrap();
    let bad = relloc(&["optimize", "--problem", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_prints_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = relloc(&["bench", "--config", &cfg, "--trials", "1", "--sigmas", "1,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sigma_dB"));
    assert!(text.contains("dead reckoning"));
}
