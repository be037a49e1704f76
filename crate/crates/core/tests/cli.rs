mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, one_shot_server, silent_server};
use serde_json::Value;

fn afp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afp"))
        .args(args)
        .env_remove("AFP_LLM_API_KEY")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn copy_fixture(name: &str, dir: &Path) {
    std::fs::copy(fixture(name), dir.join(name)).unwrap();
}

#[test]
fn run_writes_bundle_and_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bundle.json");
    let dist = tmp.path().join("d.txt");
    let dendro = tmp.path().join("tree.txt");
    let manifest = fixture("qualitative16.manifest.json");
    let graph = fixture("qualitative16.graph.json");
    let o = afp(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
        "--question",
        "What moves?",
        "--options",
        "Ambulance,Tent",
        "--no-refine",
        "--dump-distances",
        dist.to_str().unwrap(),
        "--dump-dendrogram",
        dendro.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let bundle = read_json(&out);
    assert_eq!(bundle["frames"].as_array().unwrap().len(), 3);
    assert_eq!(bundle["report"]["frames_in"], 16);
    let prompt = bundle["prompt_text"].as_str().unwrap();
    assert!(prompt.contains("Semantic graph:\nNodes: ambulance, road, tent\n(ambulance, moving along, road)"));
    assert!(prompt.ends_with("A) Ambulance\nB) Tent\nAnswer with the option letter only."));

    let dist = std::fs::read_to_string(dist).unwrap();
    assert!(dist.starts_with("# d_cos 16x16"));
    assert!(dist.contains("# d_comb"));
    let dendro = std::fs::read_to_string(dendro).unwrap();
    assert_eq!(dendro.lines().count(), 1 + 13);
}

#[test]
fn run_single_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b.json");
    let manifest = fixture("single.manifest.json");
    let o = afp(&["run", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let bundle = read_json(&out);
    assert_eq!(bundle["report"]["tau"], Value::Null);
    assert_eq!(bundle["question"], "What happens in this video?");
}

#[test]
fn bad_parameters_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b.json");
    let manifest = fixture("single.manifest.json");
    let o = afp(&["run", "--manifest", manifest.to_str().unwrap(), "--alpha", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    assert_eq!(afp(&["run", "--bogus"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_manifest_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b.json");
    let o = afp(&["run", "--manifest", "/nonexistent.manifest.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn batch_over_empty_directory() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = afp(&["batch", "--in", input.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success());
    let report = read_json(&out.path().join("batch_report.json"));
    assert_eq!(report["stats"]["videos"], 0);
    assert!(report["warnings"][0].as_str().unwrap().contains("empty batch"));
}

#[test]
fn batch_over_three_manifests_averages_per_video_values() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    for name in [
        "qualitative16.manifest.json",
        "qualitative16.qa.json",
        "qualitative16.graph.json",
        "counting32.manifest.json",
        "single.manifest.json",
    ] {
        copy_fixture(name, input.path());
    }
    let o = afp(&["batch", "--in", input.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut frames_in = 0.0;
    let mut frames_out = 0.0;
    let mut token_pct = 0.0;
    for stem in ["qualitative16", "counting32", "single"] {
        let b = read_json(&out.path().join(format!("{stem}.bundle.json")));
        frames_in += b["report"]["frames_in"].as_f64().unwrap();
        frames_out += b["report"]["frames_out"].as_f64().unwrap();
        token_pct += b["report"]["token_reduction_pct"].as_f64().unwrap();
    }
    let qual = read_json(&out.path().join("qualitative16.bundle.json"));
    assert_eq!(qual["question"], "Which object in the video is moving fastest?");
    assert!(qual["graph_text"].as_str().unwrap().starts_with("Semantic graph:"));

    let stats = &read_json(&out.path().join("batch_report.json"))["stats"];
    assert_eq!(stats["videos"], 3);
    assert!((stats["avg_frames_in"].as_f64().unwrap() - frames_in / 3.0).abs() < 1e-9);
    assert!((stats["avg_frames_out"].as_f64().unwrap() - frames_out / 3.0).abs() < 1e-9);
    assert!((stats["avg_token_reduction_pct"].as_f64().unwrap() - token_pct / 3.0).abs() < 1e-9);
}

#[test]
fn batch_with_one_malformed_manifest() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    copy_fixture("single.manifest.json", input.path());
    copy_fixture("mixed20.manifest.json", input.path());
    std::fs::write(input.path().join("broken.manifest.json"), "{\"video_id\": \"broken\", \"frames\": [").unwrap();
    let o = afp(&["batch", "--in", input.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    assert!(out.path().join("single.bundle.json").is_file());
    assert!(out.path().join("mixed20.bundle.json").is_file());
    assert!(!out.path().join("broken.bundle.json").exists());
    let report = read_json(&out.path().join("batch_report.json"));
    assert_eq!(report["stats"]["videos"], 2);
    assert_eq!(report["failures"][0]["file"], "broken.manifest.json");
}

#[test]
fn unresponsive_graph_service_degrades() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b.json");
    let manifest = fixture("qualitative16.manifest.json");
    let endpoint = silent_server();
    let o = afp(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--question",
        "Which vehicle?",
        "--options",
        "car,van",
        "--graph-endpoint",
        &endpoint,
        "--llm-timeout-ms",
        "300",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bundle = read_json(&out);
    assert_eq!(bundle["graph_text"], "");
    assert!(bundle["warnings"][0].as_str().unwrap().contains("graph fallback failed"));
}

#[test]
fn graph_fallback_prints_generated_graph() {
    let content = r#"Here you go: {"nodes": ["car"], "triplets": [["car", "parked near", "house"]]}"#;
    let body = serde_json::json!({"choices": [{"message": {"content": content}}]}).to_string();
    let (endpoint, requests) = one_shot_server(body);
    let o = Command::new(env!("CARGO_BIN_EXE_afp"))
        .args(["graph-fallback", "--question", "Where is the car?", "--options", "street,garage"])
        .args(["--endpoint", &endpoint, "--timeout-ms", "5000"])
        .env("AFP_LLM_API_KEY", "test-key")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let graph: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(graph["nodes"], serde_json::json!(["car", "house"]));
    assert_eq!(graph["triplets"][0], serde_json::json!(["car", "parked near", "house"]));

    let request = requests.recv().unwrap();
    assert!(request.contains("Bearer test-key"));
    assert!(request.contains("Where is the car?"));
    assert!(request.contains("B) garage"));
}

#[test]
fn graph_fallback_timeout_exits_one() {
    let endpoint = silent_server();
    let o = afp(&["graph-fallback", "--question", "Q?", "--endpoint", &endpoint, "--timeout-ms", "200"]);
    assert_eq!(o.status.code(), Some(1));
}
