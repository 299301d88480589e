use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::clock::ManualClock;
use crate::log::{sessions_from_events, MemorySink, DOWNLOAD};
use crate::policy::{Policy, PolicyConfig};
use crate::shell::Honeypot;

fn endpoint(policy: PolicyConfig) -> (InProcessEndpoint, Arc<MemorySink>) {
    let sink = Arc::new(MemorySink::new());
    let hp = Honeypot::builder(Policy::load(policy.with_seed(3)).unwrap(), sink.clone(), Arc::new(ManualClock::epoch()))
        .id_seed(9)
        .build()
        .unwrap();
    (InProcessEndpoint::new(hp, "jmiller"), sink)
}

fn policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::control(),
        PolicyConfig::gamepot(),
        PolicyConfig::new("block-all", 0.0, 1.0, 0.0).unwrap(),
        PolicyConfig::new("insult-all", 0.0, 0.0, 1.0).unwrap(),
    ]
}

fn play(name: &str, policy: PolicyConfig, seed: u64) -> (Transcript, Arc<MemorySink>) {
    let (mut ep, sink) = endpoint(policy);
    let t = run_persona(&persona_by_name(name).unwrap(), &mut ep, "198.51.100.7", seed, ThinkTime::default()).unwrap();
    (t, sink)
}

#[test]
fn login_only_issues_nothing() {
    let (t, sink) = play("login-only", PolicyConfig::control(), 1);
    assert_eq!(t.command_count(), 0);
    let agg = sessions_from_events(&sink.events());
    assert_eq!(agg.summaries[0].command_count, 0);
    assert!(agg.summaries[0].duration_seconds >= 1.0 && agg.summaries[0].duration_seconds <= 10.0);
}

#[test]
fn repeater_against_block_all() {
    let (t, _) = play("repeater", PolicyConfig::new("block-all", 0.0, 1.0, 0.0).unwrap(), 2);
    for cmd in REPEATER_COMMANDS {
        assert_eq!(t.inputs().filter(|i| *i == cmd).count(), 4, "{cmd}");
    }
    assert!(t.entries.iter().all(|e| e.outcome == Some(OutcomeClass::BlockMessage)));
}

#[test]
fn destroyer_against_control() {
    let (mut ep, _) = endpoint(PolicyConfig::control());
    let before = ep.honeypot().template().clone();
    let t = run_persona(&persona_by_name("destroyer").unwrap(), &mut ep, "198.51.100.7", 4, ThinkTime::default())
        .unwrap();
    let rm = t.entries.iter().find(|e| e.input == "rm -rf /").unwrap();
    assert!(rm.output.contains("Permission denied"));
    assert_eq!(t.disconnect, Disconnect::Resigned);
    assert_eq!(ep.honeypot().template(), &before);
}

#[test]
fn miner_fetches_from_two_sources() {
    let (t, sink) = play("miner-installer", PolicyConfig::control(), 5);
    let urls: std::collections::BTreeSet<_> =
        sink.events().into_iter().filter(|e| e.eventid == DOWNLOAD).filter_map(|e| e.url).collect();
    assert!(urls.len() >= 2, "{urls:?}");
    assert_eq!(t.disconnect, Disconnect::Resigned);
}

#[test]
fn return_spammer_presses_return_after_insults() {
    let (t, sink) = play("return-spammer", PolicyConfig::new("insult-all", 0.0, 0.0, 1.0).unwrap(), 6);
    assert_eq!(t.entries.iter().filter(|e| e.input.is_empty()).count(), 6 * 6);
    assert_eq!(sessions_from_events(&sink.events()).summaries[0].command_count, 6);
}

#[test]
fn runs_are_reproducible() {
    for p in builtin_personas() {
        let a = play(&p.name, PolicyConfig::gamepot(), 77);
        let b = play(&p.name, PolicyConfig::gamepot(), 77);
        assert_eq!(a.0, b.0, "{}", p.name);
        assert_eq!(a.1.events(), b.1.events(), "{}", p.name);
    }
}

#[test]
fn every_persona_terminates_against_every_policy() {
    for p in builtin_personas() {
        for policy in policies() {
            let label = policy.name.clone();
            let (t, sink) = play(&p.name, policy, 8);
            assert!(t.entries.len() <= p.step_bound(), "{} vs {label}", p.name);
            let agg = sessions_from_events(&sink.events());
            assert_eq!(agg.summaries.len(), 1);
            assert_eq!(agg.summaries[0].command_count, t.command_count(), "{} vs {label}", p.name);
            let offsets: Vec<u64> = t.entries.iter().map(|e| e.offset_ms).collect();
            assert!(offsets.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

fn campaign_endpoints(labels: &[&str]) -> (BTreeMap<String, Box<dyn Endpoint>>, BTreeMap<String, Arc<MemorySink>>) {
    let mut eps: BTreeMap<String, Box<dyn Endpoint>> = BTreeMap::new();
    let mut sinks = BTreeMap::new();
    for label in labels {
        let (ep, sink) = endpoint(PolicyConfig::new(label, 0.5, 0.25, 0.25).unwrap());
        eps.insert(label.to_string(), Box::new(ep));
        sinks.insert(label.to_string(), sink);
    }
    (eps, sinks)
}

#[test]
fn campaign_counts_match() {
    let counts: BTreeMap<String, usize> = [("a", 3), ("b", 5), ("c", 0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let (mut eps, sinks) = campaign_endpoints(&["a", "b", "c"]);
    let spec = CampaignSpec::new(counts, builtin_personas());
    let result = run_campaign(&spec, &mut eps, 42).unwrap();
    for (label, n) in [("a", 3), ("b", 5), ("c", 0)] {
        assert_eq!(result.transcripts[label].len(), n);
        assert_eq!(sessions_from_events(&sinks[label].events()).summaries.len(), n);
    }
    assert!(sinks["c"].is_empty());
}

#[test]
fn campaign_needs_endpoints() {
    let counts: BTreeMap<String, usize> = [("ghost".to_string(), 1)].into();
    let spec = CampaignSpec::new(counts, builtin_personas());
    let mut eps = BTreeMap::new();
    assert!(matches!(run_campaign(&spec, &mut eps, 1), Err(SimError::MissingEndpoint(_))));
}
