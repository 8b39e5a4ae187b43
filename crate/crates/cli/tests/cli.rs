use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Stdio};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiprior"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let c = json!({
        "seed": 3,
        "environment": { "theta": [1.0, 1.3], "sigma": [1.0, 1.0] },
        "sources": [ { "zeta0": [1.0, 1.3], "nu0": [1.0, 1.0] } ],
        "policy": { "family": "epsilon-greedy", "epsilon": 0.25 },
        "stopping": { "burn_in": 20, "horizon": 80, "beta": 0.01 },
        "payoff": { "discount": 0.99, "cost": 1.15 }
    });
    std::fs::write(&path, c.to_string()).unwrap();
    path
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn bounds_eval_omega_table() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("omega.json");
    std::fs::write(&params, r#"{"a":0,"b":0.7,"c":0.25,"e":0.4}"#).unwrap();
    let out = ok(bin().args(["bounds", "eval", "--fn", "omega", "--params"]).arg(&params));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("quantity\tvalue"));
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(row[0], "omega");
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.7 * 0.25 / 0.65);
}

#[test]
fn bounds_eval_reports_missing_constants() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("mb.json");
    let p = json!({
        "theta": [1.0, 1.3],
        "sources": [ { "zeta0": [1.0, 1.3], "nu0": [1.0, 1.0] } ],
        "epsilon": 0.25,
        "stopping": { "burn_in": 100, "horizon": 1000, "beta": 0.01 }
    });
    std::fs::write(&params, p.to_string()).unwrap();
    let out = bin().args(["bounds", "eval", "--fn", "mistake-bound", "--params"]).arg(&params).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("upsilon"));
}

#[test]
fn run_writes_stage_lines_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = ok(bin().arg("run").arg("--config").arg(&config));
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let summary = lines.last().unwrap();
    assert_eq!(summary["kind"], "summary");
    assert!(summary["payoff"].is_f64());
    let stages = lines.iter().filter(|l| l["kind"] == "stage").count() as u64;
    assert!(stages >= summary["stop_time"].as_u64().unwrap());
    assert_eq!(ok(bin().arg("run").arg("--config").arg(&config)), out);
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("tables");
    ok(bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .args(["--param", "epsilon", "--values", "0.2,0.6", "--reps", "20", "--seed", "1", "--out"])
        .arg(&out_dir));
    let stopping = std::fs::read_to_string(out_dir.join("stopping.tsv")).unwrap();
    let mut lines = stopping.lines();
    assert!(lines.next().unwrap().starts_with("epsilon\t"));
    assert_eq!(lines.count(), 2);
    assert!(out_dir.join("payoff.tsv").exists());
    assert!(out_dir.join("weights.tsv").exists());
    assert!(out_dir.join("metadata.json").exists());
}

#[test]
fn figure_preset_and_unknown_name() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig");
    ok(bin().args(["figure", "--which", "stopping", "--reps", "4", "--out"]).arg(&out_dir));
    let table = std::fs::read_to_string(out_dir.join("stopping.tsv")).unwrap();
    assert_eq!(table.lines().count(), 10);

    let out = bin().args(["figure", "--which", "nope", "--out"]).arg(&out_dir).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown figure"));
}

#[test]
fn simulate_single_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("sim");
    ok(bin()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .args(["--reps", "10", "--seed", "2", "--no-series", "--out"])
        .arg(&out_dir));
    let summary = std::fs::read_to_string(out_dir.join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(!out_dir.join("weights.tsv").exists());
}

fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn serve_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--addr", "127.0.0.1:0", "--data"])
        .arg(dir.path().join("data"))
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listen line").to_string();

    let config = std::fs::read_to_string(write_config(dir.path())).unwrap();
    let (status, _) = http(&addr, "POST", "/sessions", &format!(r#"{{"id":"tcp","config":{config}}}"#));
    assert_eq!(status, 201);
    let (status, body) = http(&addr, "POST", "/sessions/tcp/assignment", "");
    assert_eq!(status, 200, "{body}");
    let (status, _) = http(&addr, "GET", "/sessions/missing", "");
    assert_eq!(status, 404);
    child.kill().unwrap();
    child.wait().unwrap();
}
