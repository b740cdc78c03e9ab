// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn altgrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_altgrasp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_library_writes_requested_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("libs/cup.json");
    let result = altgrasp(&[
        "gen-library",
        "--object-id",
        "cup",
        "--center",
        "0.4,-0.1,0.2",
        "--count",
        "12",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["object_id"], "cup");
    let candidates = v["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 12);
    for c in candidates {
        let p: Vec<f64> = c["p"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let r = ((p[0] - 0.4).powi(2) + (p[1] + 0.1).powi(2) + (p[2] - 0.2).powi(2)).sqrt();
        assert!((r - 0.1).abs() < 1e-9);
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        altgrasp(&["run", "--config", s(&missing)]).status.code(),
        Some(1)
    );
    assert_eq!(altgrasp(&["no-such-command"]).status.code(), Some(1));
    let out = dir.path().join("x.json");
    let bad_center = altgrasp(&[
        "gen-library",
        "--object-id",
        "a",
        "--center",
        "1,2",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad_center.status.code(), Some(1));
    let zero = altgrasp(&[
        "gen-library",
        "--object-id",
        "a",
        "--center",
        "1,2,3",
        "--count",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(zero.status.code(), Some(1));

    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"robot_model_path": "r.json", "grasp_library_paths": [], "preparation_poses": {"poses": []}, "speed": -1}"#).unwrap();
    let result = altgrasp(&["run", "--config", s(&config)]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("error"));
}

#[test]
fn failed_cases_exit_with_two_and_still_write_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    assert!(altgrasp(&["init-demo", "--dir", s(&demo), "--poses", "2"])
        .status
        .success());
    // An object far outside the arm's reach.
    let far = demo.join("libraries/far.json");
    assert!(altgrasp(&[
        "gen-library",
        "--object-id",
        "far",
        "--center",
        "4,0,0",
        "--count",
        "20",
        "--out",
        s(&far)
    ])
    .status
    .success());
    let config = demo.join("far.json");
    std::fs::write(
        &config,
        r#"{
  "robot_model_path": "robot.json",
  "grasp_library_paths": ["libraries/box.json", "libraries/far.json"],
  "preparation_poses": {"poses": [{"p": [0.45, 0.0, 0.3], "q": [0, 1, 0, 0]}]},
  "home_configuration": [0.0, -1.5707963267948966, 1.5707963267948966, -1.5707963267948966, -1.5707963267948966, 0.0]
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = altgrasp(&["run", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(
        result.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let cases = report["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    let failed: Vec<&Value> = cases.iter().filter(|c| c["status"] == "failed").collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|c| c["object_id"] == "far"));
    assert!(out.join("summary.csv").exists());
}

#[test]
fn seed_and_out_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    assert!(altgrasp(&[
        "init-demo",
        "--dir",
        s(&demo),
        "--poses",
        "2",
        "--seed",
        "1"
    ])
    .status
    .success());
    let config = demo.join("experiment.json");
    let run = |seed: &str, out: &Path| {
        let r = altgrasp(&[
            "run",
            "--config",
            s(&config),
            "--seed",
            seed,
            "--out",
            s(out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read_to_string(out.join("report.json")).unwrap()
    };
    let a = run("1", &dir.path().join("a"));
    let b = run("2", &dir.path().join("b"));
    assert_ne!(a, b);
    let va: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(va["seed"], 1);

    // Without --out the report goes where the config says.
    let r = altgrasp(&["run", "--config", s(&config)]);
    assert!(r.status.success());
    assert!(demo.join("out/report.json").exists());
}

#[test]
fn replay_writes_the_command_log() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    assert!(altgrasp(&["init-demo", "--dir", s(&demo), "--poses", "1"])
        .status
        .success());
    let out = dir.path().join("replay");
    let r = altgrasp(&[
        "replay",
        "--config",
        s(&demo.join("experiment.json")),
        "--trace",
        s(&demo.join("trace.jsonl")),
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let log = std::fs::read_to_string(out.join("commanded_poses.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next(),
        Some("step,t,mode,blending,px,py,pz,qw,qx,qy,qz")
    );
    assert_eq!(lines.count(), 300);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"step\":0,\"t\":0,\"hand\":{\"p\":[0,0,1],\"q\":[1,0,0,0]}}\nnot json\n",
    )
    .unwrap();
    let r = altgrasp(&[
        "replay",
        "--config",
        s(&demo.join("experiment.json")),
        "--trace",
        s(&bad),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
}
