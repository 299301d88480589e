use std::time::Duration;

use baitshell_core::analysis::{bin_index, duration_summary, interaction_bins, quantile, BIN_UPPER};
use baitshell_core::log::{parse_log, EventSink, LogWriter, ParseMode, SessionEvent, SessionSummary, COMMAND_INPUT};
use baitshell_core::net::{authenticate, AuthOutcome, BanConfig, BanState, CredentialStore};
use baitshell_core::solver::{iterated_elimination, NormalForm};
use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use proptest::prelude::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// Failure history kept as a plain list; bans decided from it directly.
struct BanModel {
    cfg: BanConfig,
    failures: Vec<DateTime<Utc>>,
    until: Option<DateTime<Utc>>,
}

impl BanModel {
    fn banned(&self, now: DateTime<Utc>) -> bool {
        self.until.is_some_and(|u| now < u)
    }

    fn fail(&mut self, now: DateTime<Utc>) {
        if self.banned(now) {
            return;
        }
        let window = TimeDelta::from_std(self.cfg.window).unwrap();
        self.failures.retain(|t| now - *t < window);
        self.failures.push(now);
        if self.failures.len() >= self.cfg.max_failures {
            self.until = Some(now + TimeDelta::from_std(self.cfg.ban).unwrap());
            self.failures.clear();
        }
    }
}

fn session(instance: &str, duration: f64, commands: u64) -> SessionSummary {
    SessionSummary {
        session_id: format!("{instance}-{duration}-{commands}"),
        instance: instance.to_string(),
        src_ip: "192.0.2.1".into(),
        duration_seconds: duration,
        command_count: commands,
        login_success: true,
        close_reason: None,
    }
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        Just("\n\r\t\"\\\u{0}\u{2028}\u{feff}".to_string()),
        "[a-z ;|&>\"'\\\\$`\n{}]{0,40}",
    ]
}

proptest! {
    #[test]
    fn ban_state_agrees_with_history_model(
        steps in prop::collection::vec((0u64..90_000, any::<bool>(), 0usize..3), 1..120),
        max_failures in 1usize..7,
        window in 1u64..120,
        ban in 1u64..900,
    ) {
        let cfg = BanConfig { max_failures, window: Duration::from_secs(window), ban: Duration::from_secs(ban) };
        let store = CredentialStore::from_pairs(&[("root", "hunter2!x")]).unwrap();
        let bans = BanState::new(cfg);
        let mut models: Vec<BanModel> = (0..3).map(|_| BanModel { cfg, failures: vec![], until: None }).collect();
        let mut now = t0();
        for (dt_ms, good, ip) in steps {
            now += TimeDelta::milliseconds(dt_ms as i64);
            let addr = format!("198.51.100.{ip}");
            let pw = if good { "hunter2!x" } else { "guess" };
            let got = authenticate(&store, &bans, "root", pw, &addr, now);
            let model = &mut models[ip];
            if model.banned(now) {
                prop_assert!(matches!(got, AuthOutcome::Banned { .. }), "banned address reached authentication");
            } else if good {
                prop_assert_eq!(got, AuthOutcome::Accept);
            } else {
                prop_assert_eq!(got, AuthOutcome::Reject);
                model.fail(now);
            }
        }
    }

    #[test]
    fn binning_is_a_partition(counts in prop::collection::vec(0u64..1_000, 0..300)) {
        let sessions: Vec<_> = counts.iter().map(|c| session("x", 1.0, *c)).collect();
        let bins = interaction_bins(&sessions, "x");
        prop_assert_eq!(bins.totals.iter().sum::<u64>() + bins.overflow, counts.len() as u64);
        for c in &counts {
            let hits = (0..8)
                .filter(|i| {
                    let lo = if *i == 0 { 0 } else { BIN_UPPER[i - 1] + 1 };
                    (lo..=BIN_UPPER[*i]).contains(c)
                })
                .count();
            prop_assert_eq!(hits + usize::from(*c > 700), 1);
            prop_assert_eq!(bin_index(*c).is_none(), *c > 700);
        }
        if !counts.is_empty() {
            let exact = bins.exact_percentages();
            for (e, t) in exact.iter().zip(bins.totals.iter().chain([&bins.overflow])) {
                prop_assert_eq!(*e, 100.0 * *t as f64 / counts.len() as f64);
            }
            let rounded: f64 = bins.percentages.iter().sum::<f64>() + bins.overflow_percentage;
            prop_assert!((rounded - 100.0).abs() <= 0.05 + 1e-9);
        }
    }

    #[test]
    fn duration_summary_is_ordered(values in prop::collection::vec(0.0f64..2_000.0, 1..200)) {
        let sessions: Vec<_> = values.iter().map(|v| session("x", *v, 0)).collect();
        let s = duration_summary(&sessions, "x").stats.unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn quantile_hits_order_statistics(mut values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        for (k, v) in values.iter().enumerate() {
            let p = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
            prop_assert!((quantile(&values, p) - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn event_lines_round_trip(input in text(), message in text(), ip in text(), ms in 0i64..4_000_000_000_000) {
        let mut e = SessionEvent::new(COMMAND_INPUT, "s1", &ip, DateTime::from_timestamp_millis(ms).unwrap(), "gamepot");
        e.input = Some(input);
        e.message = Some(message);
        let line = e.to_line();
        prop_assert!(!line.contains('\n'));
        let back = SessionEvent::from_line(&line).unwrap();
        prop_assert_eq!(back.to_line(), line);
        prop_assert_eq!(back, e);
    }

    #[test]
    fn elimination_survivors_are_undominated(
        a in prop::collection::vec(prop::collection::vec(-3i8..4, 4), 1..5),
        b in prop::collection::vec(prop::collection::vec(-3i8..4, 4), 1..5),
    ) {
        let rows = a.len().min(b.len());
        let to_f = |m: &[Vec<i8>]| m[..rows].iter().map(|r| r.iter().map(|x| *x as f64).collect()).collect();
        let nf = NormalForm::from_matrices(to_f(&a), to_f(&b)).unwrap();
        let (reduced, trace) = iterated_elimination(&nf);
        let (r, c) = reduced.shape();
        prop_assert!(r >= 1 && c >= 1);
        prop_assert_eq!(trace.replay(&nf).map(|v| v.len()), [r, c]);
        for s in 0..r {
            for t in 0..r {
                prop_assert!(s == t || !(0..c).all(|o| reduced.payoff(0, s, o) > reduced.payoff(0, t, o)));
            }
        }
        for s in 0..c {
            for t in 0..c {
                prop_assert!(s == t || !(0..r).all(|o| reduced.payoff(1, o, s) > reduced.payoff(1, o, t)));
            }
        }
    }
}

#[test]
fn log_file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.ndjson");
    let w = LogWriter::open(&first).unwrap();
    for (i, s) in ["plain", "", "quote\"back\\slash", "nl\nin\r\nside", "\u{1F41A} shell", "\u{0}\u{7f}\u{2028}"].iter().enumerate() {
        let mut e = SessionEvent::new(COMMAND_INPUT, "s", "203.0.113.9", t0() + TimeDelta::milliseconds(i as i64 * 1_001), "heliza");
        e.input = Some(s.to_string());
        e.duration = Some(i as f64 / 3.0);
        w.append(&e).unwrap();
    }
    w.close().unwrap();
    let bytes = std::fs::read(&first).unwrap();
    let parsed = parse_log(bytes.as_slice(), ParseMode::Strict).unwrap();
    let second = dir.path().join("b.ndjson");
    let w = LogWriter::open(&second).unwrap();
    for e in &parsed.events {
        w.append(e).unwrap();
    }
    w.close().unwrap();
    assert_eq!(std::fs::read(&second).unwrap(), bytes);
}
