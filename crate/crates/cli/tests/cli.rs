// Copyright 2026 The ACP+ Authors.
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

//! The `acp` binary end to end: analytics output, simulation files and
//! their manifests, exit codes, and monitor/source over loopback UDP.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn acp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_acp"))
}

fn run(args: &[&str]) -> Output {
    acp().args(args).output().expect("running acp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_prints_closed_forms() {
    let o = run(&["analyze", "mm1", "--mu", "1", "--lambda", "0.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 3.5);

    let o = run(&[
        "analyze", "tandem", "--mu1", "1", "--mu2", "2", "--lambda", "0.4",
    ]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v > 3.0 && v.is_finite());

    let o = run(&["analyze", "optimum", "--mm1", "--mu", "1"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 0.531).abs() < 1e-3);
    assert!((v["packets_per_system_time"].as_f64().unwrap() - 1.132).abs() < 1e-3);

    let o = run(&["analyze", "optimum", "--tandem", "--mu1", "1", "--mu2", "1"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["age"].as_f64().unwrap() - 5.017).abs() < 1e-3);
}

#[test]
fn analyze_sweep_is_csv() {
    let o = run(&["analyze", "mm1", "--mu", "1", "--sweep", "0.1:0.9:0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,avg_age,ci_halfwidth");
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("0.1,"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "mm1", "--mu", "1"]).status.code(), Some(2));
    // unstable operating point
    assert_eq!(
        run(&["analyze", "mm1", "--mu", "1", "--lambda", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["source", "--peer", "not-an-address"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["sim", "--config", "/nonexistent.json", "--out", "/tmp/x"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"seed": 1, "duration": 10, "network": {"forward": []}, "run": {"mode": "nope"}}"#,
    )
    .unwrap();
    let o = run(&[
        "sim",
        "--config",
        path_str(&bad),
        "--out",
        path_str(&dir.path().join("o.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn sim_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("tandem.json");
    let sim = |out: &Path, seed: &str| {
        let o = run(&[
            "sim",
            "--config",
            &cfg,
            "--out",
            path_str(out),
            "--duration",
            "20000",
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = sim(&dir.path().join("a.json"), "7");
    let b = sim(&dir.path().join("b.json"), "7");
    let c = sim(&dir.path().join("c.json"), "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let metrics: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(metrics["seed"], 7);
    assert!(metrics["avg_age"].as_f64().unwrap() > 0.0);

    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"][1], "sim");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    assert!(manifest["end_wall"].as_f64().unwrap() >= manifest["start_wall"].as_f64().unwrap());
}

#[test]
fn sweep_writes_curve_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("mm1.json");
    let sweep = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "sweep",
            "--config",
            &cfg,
            "--grid",
            "0.2:0.8:0.2",
            "--duration",
            "5000",
            "--out",
        ];
        args.push(path_str(out));
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let par = sweep(&dir.path().join("par.csv"), &[]);
    let seq = sweep(&dir.path().join("seq.csv"), &["--sequential"]);
    assert_eq!(par, seq);
    let lines: Vec<&str> = par.lines().collect();
    assert_eq!(lines[0], "lambda,avg_age,ci_halfwidth");
    assert_eq!(lines.len(), 5);
    assert!(dir.path().join("par.csv.manifest.json").exists());

    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--grid",
        "",
        "--out",
        path_str(&dir.path().join("e.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "sweep",
        "--config",
        &config("net_a.json"),
        "--grid",
        "1,2",
        "--out",
        path_str(&dir.path().join("f.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

/// Starts a monitor on an ephemeral loopback port and returns it with the
/// address it printed.
fn spawn_monitor(extra: &[&str]) -> (Child, String) {
    let mut child = acp()
        .args(["monitor", "--bind", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("monitor banner")
        .to_string();
    (child, addr)
}

fn trace_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn loopback_fixed_rate_session() {
    let dir = tempfile::tempdir().unwrap();
    let mon_trace = dir.path().join("monitor.jsonl");
    let src_trace = dir.path().join("source.jsonl");
    let (monitor, addr) = spawn_monitor(&["--trace", path_str(&mon_trace), "--duration", "6"]);
    let o = run(&[
        "source",
        "--peer",
        &addr,
        "--policy",
        "fixed:20",
        "--duration",
        "3",
        "--trace",
        path_str(&src_trace),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(summary["sent"].as_u64().unwrap() > 30);
    assert!((summary["avg_lambda"].as_f64().unwrap() - 20.0).abs() < 1e-9);
    assert!(summary["fresh_acks"].as_u64().unwrap() > 0);

    let out = monitor.wait_with_output().unwrap();
    assert!(out.status.success());
    let counters: Value = serde_json::from_str(stdout(&out).lines().last().unwrap()).unwrap();
    assert!(counters["accepted"].as_u64().unwrap() > 30);
    let resets = trace_lines(&mon_trace);
    assert_eq!(resets.len() as u64, counters["accepted"].as_u64().unwrap());
    assert!(resets
        .iter()
        .all(|r| r["age_reset"].as_f64().unwrap() >= 0.0));
    assert!(!trace_lines(&src_trace).is_empty());
    assert!(dir.path().join("monitor.jsonl.manifest.json").exists());
}

#[test]
fn loopback_lazy_session() {
    let (monitor, addr) = spawn_monitor(&["--duration", "5"]);
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("lazy.jsonl");
    let o = run(&[
        "source",
        "--peer",
        &addr,
        "--policy",
        "lazy",
        "--duration",
        "2",
        "--trace",
        path_str(&trace),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in trace_lines(&trace) {
        let product = r["lambda"].as_f64().unwrap() * r["rtt_ewma"].as_f64().unwrap();
        assert!((product - 1.0).abs() < 1e-9, "{r}");
    }
    assert!(monitor.wait_with_output().unwrap().status.success());
}

#[test]
fn sigint_flushes_the_monitor_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("monitor.jsonl");
    let (mut monitor, addr) = spawn_monitor(&["--trace", path_str(&trace)]);
    let o = run(&[
        "source",
        "--peer",
        &addr,
        "--policy",
        "fixed:50",
        "--duration",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rc = unsafe { libc::kill(monitor.id() as libc::pid_t, libc::SIGINT) };
    assert_eq!(rc, 0);
    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = monitor.try_wait().unwrap() {
            break s;
        }
        assert!(Instant::now() < deadline, "monitor ignored SIGINT");
        std::thread::sleep(Duration::from_millis(20));
    };
    assert!(status.success());
    let resets = trace_lines(&trace);
    assert!(resets.len() > 10);
    let seqs: Vec<u64> = resets.iter().map(|r| r["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn source_without_monitor_fails() {
    // reserve a port, then release it so nothing is listening there
    let port = std::net::UdpSocket::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let o = run(&[
        "source",
        "--peer",
        &port.to_string(),
        "--probe-count",
        "3",
        "--probe-timeout",
        "0.05",
        "--duration",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
