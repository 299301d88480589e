use std::collections::BTreeMap;
use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::endpoint::{AttackSession, Endpoint};
use super::persona::{OutcomeClass, Persona, Reaction, INSULT_BACK};
use super::SimError;

/// Uniform think time between lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinkTime {
    pub min: Duration,
    pub max: Duration,
}

impl Default for ThinkTime {
    fn default() -> Self {
        Self { min: Duration::from_secs(1), max: Duration::from_secs(10) }
    }
}

impl ThinkTime {
    pub fn draw(&self, rng: &mut impl Rng) -> Duration {
        let (lo, hi) = (self.min.as_millis() as u64, self.max.as_millis() as u64);
        Duration::from_millis(if hi > lo { rng.random_range(lo..=hi) } else { lo })
    }
}

const RETURN_PAUSE: ThinkTime =
    ThinkTime { min: Duration::from_millis(200), max: Duration::from_millis(1_000) };

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub input: String,
    /// `None` for blank lines and for lines the honeypot never ran.
    pub outcome: Option<OutcomeClass>,
    pub output: String,
    /// Milliseconds since login when the reply arrived.
    pub offset_ms: u64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disconnect {
    ScriptEnd,
    Resigned,
    ClosedByHoneypot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub persona: String,
    pub session_id: Option<String>,
    pub src_ip: String,
    pub entries: Vec<TranscriptEntry>,
    pub disconnect: Disconnect,
}

impl Transcript {
    /// Non-blank lines the honeypot accepted, i.e. what its log counts.
    pub fn command_count(&self) -> u64 {
        self.entries.iter().filter(|e| e.accepted && !e.input.trim().is_empty()).count() as u64
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.input.as_str())
    }
}

struct Run<'a, 's> {
    conn: Box<dyn AttackSession + 's>,
    rng: &'a mut ChaCha8Rng,
    entries: Vec<TranscriptEntry>,
}

impl Run<'_, '_> {
    /// Returns the reply text and whether the session is still open.
    fn send(&mut self, input: &str, pause: ThinkTime) -> Result<(String, bool), SimError> {
        let d = pause.draw(self.rng);
        self.conn.think(d);
        let reply = self.conn.send(input)?;
        self.entries.push(TranscriptEntry {
            input: input.to_string(),
            outcome: None,
            output: reply.output.clone(),
            offset_ms: self.conn.elapsed().as_millis() as u64,
            accepted: reply.accepted,
        });
        Ok((reply.output, !reply.closed))
    }
}

fn expand(template: &str, user: &str, rng: &mut impl Rng) -> String {
    let mut out = template.replace("{user}", user);
    while let Some(i) = out.find("{tag}") {
        out.replace_range(i..i + 5, &format!("{:08x}", rng.next_u32()));
    }
    out
}

/// Plays one persona against an endpoint. Same persona, seed and endpoint
/// state give the same transcript.
pub fn run_persona(
    persona: &Persona,
    endpoint: &mut dyn Endpoint,
    src_ip: &str,
    seed: u64,
    think: ThinkTime,
) -> Result<Transcript, SimError> {
    persona.validate()?;
    let classifier = endpoint.classifier();
    let user = endpoint.username().to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conn = endpoint.connect(src_ip)?;
    let session_id = conn.session_id();
    let mut run = Run { conn, rng: &mut rng, entries: Vec::new() };

    let mut disconnect = Disconnect::ScriptEnd;
    let mut i = 0;
    let mut repeats = 0;
    let mut input = String::new();
    'script: while i < persona.steps.len() {
        let step = &persona.steps[i];
        if repeats == 0 {
            input = expand(&step.input, &user, run.rng);
        }
        let (output, open) = run.send(&input, think)?;
        if !open {
            disconnect = Disconnect::ClosedByHoneypot;
            break;
        }
        let class = classifier.classify(&input, &output);
        if let Some(last) = run.entries.last_mut() {
            last.outcome = Some(class);
        }
        match step.reaction(class) {
            Reaction::Proceed => {}
            Reaction::Repeat { max } => {
                if repeats < *max {
                    repeats += 1;
                    continue;
                }
            }
            Reaction::TryAlternative { step } => {
                i = *step;
                repeats = 0;
                continue;
            }
            Reaction::SendInsultBack => {
                let line = INSULT_BACK[run.rng.random_range(0..INSULT_BACK.len())];
                let (_, open) = run.send(line, think)?;
                if !open {
                    disconnect = Disconnect::ClosedByHoneypot;
                    break;
                }
            }
            Reaction::PressReturn { times } => {
                for _ in 0..*times {
                    let (_, open) = run.send("", RETURN_PAUSE)?;
                    if !open {
                        disconnect = Disconnect::ClosedByHoneypot;
                        break 'script;
                    }
                }
            }
            Reaction::Resign => {
                disconnect = Disconnect::Resigned;
                break;
            }
        }
        i += 1;
        repeats = 0;
    }
    let mut entries = std::mem::take(&mut run.entries);
    for e in &mut entries {
        if !e.accepted || e.input.trim().is_empty() {
            e.outcome = None;
        }
    }
    if disconnect == Disconnect::ScriptEnd {
        let d = think.draw(run.rng);
        run.conn.think(d);
    }
    run.conn.disconnect();
    Ok(Transcript { persona: persona.name.clone(), session_id, src_ip: src_ip.to_string(), entries, disconnect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    /// Sessions to generate per instance label.
    pub counts: BTreeMap<String, usize>,
    pub personas: Vec<Persona>,
    pub think: ThinkTime,
    /// Quiet time between consecutive sessions on one instance.
    pub gap: ThinkTime,
}

impl CampaignSpec {
    pub fn new(counts: BTreeMap<String, usize>, personas: Vec<Persona>) -> Self {
        Self {
            counts,
            personas,
            think: ThinkTime::default(),
            gap: ThinkTime { min: Duration::from_secs(30), max: Duration::from_secs(3_600) },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub transcripts: BTreeMap<String, Vec<Transcript>>,
}

fn label_seed(seed: u64, label: &str) -> u64 {
    label.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn src_ip(rng: &mut impl Rng) -> String {
    let net = ["198.51.100", "203.0.113", "192.0.2"][rng.random_range(0..3)];
    format!("{net}.{}", rng.random_range(1..255))
}

/// Runs the requested number of sessions on each instance. Instances run in
/// parallel; sessions within one instance run back to back.
pub fn run_campaign(
    spec: &CampaignSpec,
    endpoints: &mut BTreeMap<String, Box<dyn Endpoint>>,
    seed: u64,
) -> Result<CampaignResult, SimError> {
    for (label, n) in &spec.counts {
        if *n > 0 && !endpoints.contains_key(label) {
            return Err(SimError::MissingEndpoint(label.clone()));
        }
    }
    if spec.counts.values().any(|n| *n > 0) {
        if spec.personas.is_empty() {
            return Err(SimError::NoPersonas);
        }
        for p in &spec.personas {
            p.validate()?;
        }
    }
    let weights: Vec<u32> = spec.personas.iter().map(|p| p.weight).collect();
    let picker = if spec.personas.is_empty() { None } else { Some(WeightedIndex::new(&weights).map_err(|_| SimError::NoPersonas)?) };

    let results: Vec<(String, Result<Vec<Transcript>, SimError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .iter_mut()
            .filter_map(|(label, ep)| spec.counts.get(label).map(|n| (label, ep, *n)))
            .map(|(label, ep, n)| {
                let picker = picker.clone();
                let handle = scope.spawn(move || -> Result<Vec<Transcript>, SimError> {
                    let mut rng = ChaCha8Rng::seed_from_u64(label_seed(seed, label));
                    let mut out = Vec::with_capacity(n);
                    for _ in 0..n {
                        let persona = &spec.personas[picker.as_ref().expect("personas checked").sample(&mut rng)];
                        let ip = src_ip(&mut rng);
                        let t = run_persona(persona, ep.as_mut(), &ip, rng.next_u64(), spec.think)?;
                        out.push(t);
                        let gap = spec.gap.draw(&mut rng);
                        ep.idle(gap);
                    }
                    ep.finish()?;
                    Ok(out)
                });
                (label.clone(), handle)
            })
            .collect();
        handles.into_iter().map(|(l, h)| (l, h.join().unwrap_or(Err(SimError::Panicked)))).collect()
    });

    let mut result = CampaignResult::default();
    for (label, r) in results {
        result.transcripts.insert(label, r?);
    }
    Ok(result)
}
