use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use baitshell_core::clock::{ManualClock, SharedClock, SystemClock};
use baitshell_core::log::{sessions_from_events, MemorySink, CLOSED, CONNECT, LOGIN_FAILED};
use baitshell_core::net::{serve, BanConfig, BanState, CredentialStore, Gate, ServeConfig, ServiceHandle};
use baitshell_core::policy::{Policy, PolicyConfig};
use baitshell_core::shell::Honeypot;

const USER: &str = "jmiller";
const PASS: &str = "Vq9#tLr2-mW8x";

fn start(clock: SharedClock, sink: Arc<MemorySink>) -> ServiceHandle {
    let policy = Policy::load(PolicyConfig::control().with_seed(5)).unwrap();
    let hp = Honeypot::builder(policy, sink, clock).instance("control").build().unwrap();
    let creds = CredentialStore::from_pairs(&[(USER, PASS)]).unwrap();
    let mut cfg = ServeConfig::new("127.0.0.1:0".parse().unwrap(), hp, Gate::new(creds, BanState::new(BanConfig::default())));
    cfg.poll_interval = Duration::from_millis(20);
    serve(cfg).unwrap()
}

struct Client {
    stream: TcpStream,
    seen: String,
}

impl Client {
    fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Self { stream, seen: String::new() }
    }

    /// Reads until `needle` shows up after everything consumed so far.
    fn expect(&mut self, needle: &str) -> String {
        let deadline = Instant::now() + Duration::from_secs(10);
        let mut buf = [0u8; 4096];
        loop {
            if let Some(i) = self.seen.find(needle) {
                let out = self.seen[..i + needle.len()].to_string();
                self.seen.drain(..i + needle.len());
                return out;
            }
            assert!(Instant::now() < deadline, "never saw {needle:?}, got {:?}", self.seen);
            let n = self.stream.read(&mut buf).unwrap();
            assert!(n > 0, "closed before {needle:?}, got {:?}", self.seen);
            self.seen.push_str(&String::from_utf8_lossy(&buf[..n]));
        }
    }

    fn send(&mut self, line: &str) {
        self.stream.write_all(format!("{line}\r\n").as_bytes()).unwrap();
    }

    fn login(&mut self, user: &str, pass: &str) {
        self.expect("login: ");
        self.send(user);
        self.expect("Password: ");
        self.send(pass);
    }

    fn wait_eof(&mut self) -> String {
        let mut rest = Vec::new();
        let _ = self.stream.read_to_end(&mut rest);
        self.seen.push_str(&String::from_utf8_lossy(&rest));
        std::mem::take(&mut self.seen)
    }
}

fn wait_for(sink: &MemorySink, pred: impl Fn(&MemorySink) -> bool) {
    let deadline = Instant::now() + Duration::from_secs(10);
    while !pred(sink) {
        assert!(Instant::now() < deadline, "condition not reached");
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn closes(sink: &MemorySink) -> usize {
    sink.events().iter().filter(|e| e.eventid == CLOSED).count()
}

#[test]
fn login_pwd_disconnect_yields_one_summary() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(SystemClock), sink.clone());
    let mut c = Client::connect(handle.local_addr());
    c.login(USER, PASS);
    c.expect("jmiller@srv-app01:~$ ");
    c.send("pwd");
    assert!(c.expect("$ ").starts_with("/home/jmiller\n"));
    c.send("exit");
    assert!(c.wait_eof().contains("logout"));
    handle.shutdown().unwrap();

    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries.len(), 1);
    let s = &agg.summaries[0];
    assert!(s.login_success);
    assert_eq!(s.command_count, 2);
    assert_eq!(s.close_reason.as_deref(), Some("client-exit"));
    assert!(sink.events().iter().all(|e| e.instance == "control"));
}

#[test]
fn immediate_shutdown_is_clean() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(SystemClock), sink.clone());
    handle.shutdown().unwrap();
    assert!(sink.is_empty());
}

#[test]
fn simultaneous_clients_get_distinct_sessions() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(SystemClock), sink.clone());
    let mut a = Client::connect(handle.local_addr());
    let mut b = Client::connect(handle.local_addr());
    a.login(USER, PASS);
    b.login(USER, PASS);
    a.expect("$ ");
    b.expect("$ ");
    a.send("touch only-a");
    a.expect("$ ");
    b.send("ls");
    assert!(!b.expect("$ ").contains("only-a"));
    a.send("ls");
    assert!(a.expect("$ ").contains("only-a"));
    a.send("exit");
    b.send("exit");
    a.wait_eof();
    b.wait_eof();
    handle.shutdown().unwrap();

    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries.len(), 2);
    assert_ne!(agg.summaries[0].session_id, agg.summaries[1].session_id);
    assert!(agg.anomalies.is_empty(), "{:?}", agg.anomalies);
}

#[test]
fn three_wrong_passwords_close_the_connection() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(SystemClock), sink.clone());
    let mut c = Client::connect(handle.local_addr());
    for _ in 0..3 {
        c.login(USER, "wrong");
        c.expect("Login incorrect");
    }
    c.wait_eof();
    handle.shutdown().unwrap();
    let ids: Vec<_> = sink.events().iter().map(|e| e.eventid.clone()).collect();
    assert_eq!(ids.iter().filter(|e| *e == LOGIN_FAILED).count(), 3);
    assert_eq!(ids.first().map(String::as_str), Some(CONNECT));
    assert_eq!(ids.last().map(String::as_str), Some(CLOSED));
}

#[test]
fn banned_address_is_refused_even_with_valid_password() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(ManualClock::epoch()), sink.clone());
    let mut c = Client::connect(handle.local_addr());
    for _ in 0..3 {
        c.login(USER, "wrong");
        c.expect("Login incorrect");
    }
    c.wait_eof();
    let mut c = Client::connect(handle.local_addr());
    c.login(USER, "wrong");
    c.expect("Login incorrect");
    c.login(USER, "wrong");
    // fifth failure bans; the connection is dropped
    c.wait_eof();
    wait_for(&sink, |s| closes(s) == 2);
    let before = sink.len();

    let mut c = Client::connect(handle.local_addr());
    let rest = c.wait_eof();
    assert!(!rest.contains("login:"), "{rest:?}");
    handle.shutdown().unwrap();
    assert_eq!(sink.len(), before);
}

#[test]
fn idle_client_times_out() {
    let clock = Arc::new(ManualClock::epoch());
    let sink = Arc::new(MemorySink::new());
    let handle = start(clock.clone(), sink.clone());
    let mut c = Client::connect(handle.local_addr());
    c.login(USER, PASS);
    c.expect("$ ");
    clock.advance(Duration::from_secs(181));
    assert!(c.wait_eof().contains("auto-logout"));
    handle.shutdown().unwrap();
    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries[0].close_reason.as_deref(), Some("timeout"));
    assert_eq!(agg.summaries[0].duration_seconds, 180.0);
}

#[test]
fn shutdown_drains_open_sessions() {
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(SystemClock), sink.clone());
    let mut c = Client::connect(handle.local_addr());
    c.login(USER, PASS);
    c.expect("$ ");
    handle.shutdown().unwrap();
    c.wait_eof();
    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries.len(), 1);
    assert_eq!(agg.summaries[0].close_reason.as_deref(), Some("error"));
}

#[test]
fn persona_over_tcp_matches_log() {
    use baitshell_core::sim::{persona_by_name, run_persona, TcpEndpoint, ThinkTime};
    let sink = Arc::new(MemorySink::new());
    let handle = start(Arc::new(ManualClock::epoch()), sink.clone());
    let mut ep = TcpEndpoint::new("control", handle.local_addr(), USER, PASS);
    let t = run_persona(&persona_by_name("explorer").unwrap(), &mut ep, "ignored", 3, ThinkTime::default()).unwrap();
    assert!(t.entries.iter().any(|e| e.input == "pwd" && e.output == "/home/jmiller\n"));
    wait_for(&sink, |s| closes(s) == 1);
    handle.shutdown().unwrap();
    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries[0].command_count, t.command_count());

    let mut bad = TcpEndpoint::new("control", "127.0.0.1:9".parse().unwrap(), USER, "nope");
    bad.io_timeout = Duration::from_secs(2);
    assert!(run_persona(&persona_by_name("explorer").unwrap(), &mut bad, "x", 1, ThinkTime::default()).is_err());
}
