mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn eqlboard(dir: &Path, args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eqlboard"));
    cmd.args(args)
        .arg("--corpus")
        .arg(dir.join("corpus.jsonl"))
        .arg("--predictions")
        .arg(dir.join("predictions.csv"))
        .env_clear();
    cmd
}

fn run(mut cmd: Command) -> Output {
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn too_many_splits_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let out = run(eqlboard(dir.path(), &["rank", "--method", "wood", "--splits", "9"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ConfigError"), "{}", stderr(&out));

    let mut via_env = eqlboard(dir.path(), &["rank", "--method", "wood"]);
    via_env.env("EQL_SPLITS", "9");
    assert_eq!(run(via_env).status.code(), Some(1));
}

#[test]
fn wood_without_embeddings_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), false);
    let out = run(eqlboard(dir.path(), &["difficulty", "--method", "wood", "--sts-pct", "25"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingEmbedding"), "{}", stderr(&out));

    let out_dir = dir.path().join("out");
    let mut with_fallback = eqlboard(dir.path(), &["difficulty", "--method", "wood", "--fallback-features", "32"]);
    with_fallback.arg("--out").arg(&out_dir);
    let out = run(with_fallback);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("scores/wood_p25.jsonl").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    assert_eq!(run(eqlboard(dir.path(), &["rank", "--no-such-flag"])).status.code(), Some(1));
    let mut bare = Command::new(env!("CARGO_BIN_EXE_eqlboard"));
    bare.arg("rank").env_clear();
    assert_eq!(run(bare).status.code(), Some(1));
    let out = run(eqlboard(dir.path(), &["rank", "--method", "wood", "--case", "2", "--d", "1"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not both"));
}

#[test]
fn wsbias2_scores_stay_on_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let mut cmd = eqlboard(dir.path(), &["difficulty", "--method", "wsbias2"]);
    cmd.arg("--out").arg(dir.path().join("out"));
    let out = run(cmd);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("out/scores/wsbias2.jsonl")).unwrap();
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["method"], "wsbias_alg2");
    assert_eq!(header["params"]["seed"], 0);
    for line in lines {
        let b = serde_json::from_str::<Value>(line).unwrap()["B"].as_f64().unwrap();
        assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(&b), "{b}");
    }
}

#[test]
fn rank_reports_carry_provenance_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let args = ["rank", "--method", "wood,wmprob", "--case", "1", "--splits", "7", "--split-mode", "equal", "--seed", "11"];
    let mut outs = Vec::new();
    for name in ["a", "b"] {
        let mut cmd = eqlboard(dir.path(), &args);
        cmd.arg("--out").arg(dir.path().join(name));
        let out = run(cmd);
        assert!(out.status.success(), "{}", stderr(&out));
        let text = String::from_utf8(out.stdout).unwrap();
        // The last line names the output directory.
        outs.push(text.lines().filter(|l| !l.starts_with("wrote ")).collect::<Vec<_>>().join("\n"));
    }
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].starts_with("wood_p25 (tau 1.0000)"), "{}", outs[0]);
    let report = read_json(&dir.path().join("a/leaderboard/wood_p25.json"));
    assert_eq!(report["provenance"]["case_id"], 1);
    assert_eq!(report["provenance"]["splits"]["n"], 7);
    assert_eq!(report["provenance"]["splits"]["mode"], "equal_population");
    assert_eq!(report["provenance"]["extra"]["seed"], 11);
    for file in ["leaderboard/wood_p25.json", "leaderboard/wmprob.csv", "charts/wmprob.json", "scores/wmprob_model1.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn uniform_weights_rank_by_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let args = ["rank", "--method", "wood", "--splits", "3", "--weights", "1,1,1", "--d", "1", "--e", "0"];
    let mut cmd = eqlboard(dir.path(), &args);
    cmd.arg("--out").arg(dir.path().join("out"));
    let out = run(cmd);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/leaderboard/wood_p25.json"));
    let rows = report["rows"].as_array().unwrap();
    // Model k misses about 30 / (k + 3) samples, so model2 leads.
    let order: Vec<&str> = rows.iter().map(|r| r["model_id"].as_str().unwrap()).collect();
    assert_eq!(order, ["model2", "model1", "model0"]);
    assert!(rows.iter().all(|r| !r["changed"].as_bool().unwrap()));
    assert_eq!(report["tau"], 1.0);
}

#[test]
fn export_then_rank_from_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let session = dir.path().join("session");
    let mut cmd = eqlboard(dir.path(), &["export", "--method", "wsbias1", "--m", "6", "--t", "3", "--splits", "4"]);
    cmd.arg("--out").arg(&session);
    let out = run(cmd);
    assert!(out.status.success(), "{}", stderr(&out));

    let mut direct = eqlboard(dir.path(), &["rank", "--method", "wsbias1", "--m", "6", "--t", "3", "--splits", "4"]);
    direct.arg("--out").arg(dir.path().join("direct"));
    assert!(run(direct).status.success());
    let mut replay = Command::new(env!("CARGO_BIN_EXE_eqlboard"));
    replay.args(["rank", "--manifest"]).arg(session.join("manifest.json")).arg("--out").arg(dir.path().join("replay")).env_clear();
    let out = run(replay);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["leaderboard/wsbias1.json", "charts/wsbias1.json", "scores/wsbias1.jsonl"] {
        let a = std::fs::read(dir.path().join("direct").join(file)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("replay").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn ingest_prints_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let out = run(eqlboard(dir.path(), &["ingest"]));
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["train"].as_u64(), v["test"].as_u64()), (Some(24), Some(30)));
    assert_eq!(v["models"].as_array().unwrap().len(), 3);
    assert_eq!(v["inputs"]["corpus"].as_str().unwrap().len(), 64);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    resp
}

#[test]
fn serve_answers_health_checks() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let port = free_port();
    let mut cmd = eqlboard(dir.path(), &["serve", "--port", &port.to_string()]);
    cmd.arg("--out").arg(dir.path().join("data")).stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = cmd.spawn().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let session_line = lines.next().unwrap().unwrap();
    assert!(session_line.starts_with("session "), "{session_line}");
    let listening = lines.next().unwrap().unwrap();
    assert!(listening.contains(&format!(":{port}")), "{listening}");

    let resp = http_get(port, "/health");
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("ok"));
    let id = session_line.trim_start_matches("session ");
    let models = http_get(port, &format!("/sessions/{id}/models"));
    assert!(models.starts_with("HTTP/1.1 200") && models.contains("model2"), "{models}");
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn serve_refuses_bad_manifests_and_busy_ports() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), true);
    let mut bad = Command::new(env!("CARGO_BIN_EXE_eqlboard"));
    bad.args(["serve", "--corpus"]).arg(dir.path().join("missing.jsonl")).arg("--predictions").arg(dir.path().join("predictions.csv"));
    bad.arg("--out").arg(dir.path().join("data")).env_clear();
    let started = Instant::now();
    assert_eq!(run(bad).status.code(), Some(2));
    assert!(started.elapsed() < Duration::from_secs(30));

    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eqlboard"));
    cmd.args(["serve", "--port", &port]).arg("--out").arg(dir.path().join("data")).env_clear();
    let out = run(cmd);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("cannot bind"));
}
