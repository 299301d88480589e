use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use baitshell_core::log::{parse_log_file, sessions_from_events, ParseMode};

fn baitshell() -> Command {
    Command::new(env!("CARGO_BIN_EXE_baitshell"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    baitshell().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_prints_json_and_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let game = dir.path().join("game.json");
    let o = run(&[
        "solve",
        "--builtin",
        "paper",
        "--steps",
        "20",
        "--path-csv",
        csv.to_str().unwrap(),
        "--emit-game",
        game.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(out["path"]["points"], 20);
    assert_eq!(out["verification"]["passed"], true);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("lambda,residual,A:"));
    assert_eq!(lines.count(), 20);

    // the emitted game solves to the same equilibrium
    let again = run(&["solve", game.to_str().unwrap(), "--steps", "20"]);
    assert!(again.status.success(), "{}", stderr(&again));
    let again: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(again["equilibrium"], out["equilibrium"]);
}

#[test]
fn solve_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("broken.json");
    std::fs::write(&game, "{\"agents\": 3}").unwrap();
    let o = run(&["solve", game.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));

    let o = run(&["solve", "--builtin", "paper", "--epsilon", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--epsilon"));
}

#[test]
fn analyze_strict_stops_on_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.ndjson");
    let fixture = std::fs::read_to_string(root().join("fixtures/heliza_table2.ndjson")).unwrap();
    std::fs::write(&log, format!("{fixture}{{not json\n")).unwrap();

    let strict = run(&["analyze", "--log", log.to_str().unwrap(), "--strict"]);
    assert!(!strict.status.success());

    let lenient = run(&["analyze", "--log", log.to_str().unwrap(), "--format", "csv"]);
    assert!(lenient.status.success(), "{}", stderr(&lenient));
    assert!(stderr(&lenient).contains("warning: "));
    assert!(!lenient.stdout.is_empty());
}

#[test]
fn analyze_rejects_unknown_format() {
    let log = root().join("fixtures/heliza_table2.ndjson");
    let o = run(&["analyze", "--log", log.to_str().unwrap(), "--format", "yaml"]);
    assert!(!o.status.success());
}

#[test]
fn heliza_needs_a_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--count", "heliza=1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());

    let policy = root().join("config/heliza.example.toml");
    let o = run(&[
        "simulate",
        "--count",
        "heliza=3",
        "--policy",
        &format!("heliza={}", policy.display()),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("heliza.ndjson").exists());
}

#[test]
fn serve_accepts_a_login_and_logs_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("serve.ndjson");
    let creds = root().join("config/credentials.example.toml");
    let mut child = baitshell()
        .args(["serve", "--bind", "127.0.0.1:0", "--policy", "control", "--duration", "4"])
        .arg("--credentials")
        .arg(&creds)
        .arg("--log")
        .arg(&log)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().rsplit(' ').next().unwrap().to_string();
    assert!(first.starts_with("control listening on "), "{first:?}");

    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut seen = String::new();
    let mut expect = |stream: &mut TcpStream, needle: &str| {
        let mut buf = [0u8; 1024];
        while !seen.contains(needle) {
            let n = stream.read(&mut buf).unwrap();
            assert!(n > 0, "closed before {needle:?}: {seen:?}");
            seen.push_str(&String::from_utf8_lossy(&buf[..n]));
        }
        seen.clear();
    };
    expect(&mut stream, "login: ");
    stream.write_all(b"jmiller\r\n").unwrap();
    expect(&mut stream, "Password: ");
    stream.write_all(b"Vq9#tLr2-mW8x\r\n").unwrap();
    expect(&mut stream, "$ ");
    stream.write_all(b"uname -a\r\nexit\r\n").unwrap();
    let mut rest = Vec::new();
    let _ = stream.read_to_end(&mut rest);

    let deadline = Instant::now() + Duration::from_secs(30);
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(Instant::now() < deadline, "serve did not stop after --duration");
        std::thread::sleep(Duration::from_millis(100));
    };
    assert!(status.success());

    let parsed = parse_log_file(&log, ParseMode::Strict).unwrap();
    let agg = sessions_from_events(&parsed.events);
    assert_eq!(agg.summaries.len(), 1);
    assert!(agg.summaries[0].login_success);
    assert_eq!(agg.summaries[0].instance, "control");
}
