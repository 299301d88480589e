//! Per-command defender action selection.
//!
//! A [`PolicyConfig`] is a named categorical distribution over
//! allow / block / insult. Each session draws from its own [`PolicyStream`],
//! seeded from the policy seed and the session id, so replays are exact.
//!
//! Config files are TOML:
//!
//! ```toml
//! name = "gamepot"
//! seed = 42
//!
//! [probabilities]
//! allow = 0.3333333333333333
//! block = 0.3333333333333333
//! insult = 0.3333333333333334
//!
//! [messages]            # optional, paths relative to the config file
//! errno = "errno.txt"
//! insults = "insults.txt"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::DefenderAction;

const SUM_TOL: f64 = 1e-9;

const BUNDLED_ERRNO: &str = include_str!("../../data/errno.txt");
const BUNDLED_INSULTS: &str = include_str!("../../data/insults.txt");

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown policy {0:?} (expected gamepot, heliza, control or a config file)")]
    Unknown(String),
    #[error("the heliza profile has no built-in probabilities; supply them in a config file")]
    HelizaUnconfigured,
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed policy file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("policy can choose {0} but its message list is empty")]
    EmptyMessages(DefenderAction),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionProbabilities {
    pub allow: f64,
    pub block: f64,
    pub insult: f64,
}

impl ActionProbabilities {
    pub fn get(&self, action: DefenderAction) -> f64 {
        match action {
            DefenderAction::Allow => self.allow,
            DefenderAction::Block => self.block,
            DefenderAction::Insult => self.insult,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        for action in DefenderAction::ALL {
            let p = self.get(action);
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(PolicyError::Invalid(format!("{action} probability {p} is outside [0, 1]")));
            }
        }
        let sum = self.allow + self.block + self.insult;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(PolicyError::Invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessagePaths {
    pub errno: Option<PathBuf>,
    pub insults: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub name: String,
    pub probabilities: ActionProbabilities,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub messages: MessagePaths,
}

impl PolicyConfig {
    pub fn new(name: &str, allow: f64, block: f64, insult: f64) -> Result<Self, PolicyError> {
        let cfg = Self {
            name: name.to_string(),
            probabilities: ActionProbabilities { allow, block, insult },
            seed: None,
            messages: MessagePaths::default(),
        };
        cfg.probabilities.validate()?;
        Ok(cfg)
    }

    pub fn gamepot() -> Self {
        let third = 1.0 / 3.0;
        Self::new("gamepot", third, third, third).expect("thirds sum to one")
    }

    pub fn control() -> Self {
        Self::new("control", 1.0, 0.0, 0.0).expect("degenerate policy is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.name.trim().is_empty() {
            return Err(PolicyError::Invalid("name is empty".into()));
        }
        cfg.probabilities.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML policy file; message-list paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PolicyError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.messages.errno, &mut cfg.messages.insults].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policy config serializes")
    }
}

/// Resolves a builtin profile name or a policy file path.
pub fn load_policy(name_or_file: &str) -> Result<PolicyConfig, PolicyError> {
    match name_or_file {
        "gamepot" => Ok(PolicyConfig::gamepot()),
        "control" => Ok(PolicyConfig::control()),
        "heliza" => Err(PolicyError::HelizaUnconfigured),
        other => {
            let path = Path::new(other);
            if path.is_file() {
                PolicyConfig::from_file(path)
            } else {
                Err(PolicyError::Unknown(other.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageLists {
    pub errno: Vec<String>,
    pub insults: Vec<String>,
}

impl MessageLists {
    pub fn bundled() -> Self {
        Self { errno: parse_list(BUNDLED_ERRNO), insults: parse_list(BUNDLED_INSULTS) }
    }

    /// Bundled lists, with either one replaced when the config names a file.
    pub fn for_config(cfg: &PolicyConfig) -> Result<Self, PolicyError> {
        let mut lists = Self::bundled();
        if let Some(path) = &cfg.messages.errno {
            lists.errno = read_list(path)?;
        }
        if let Some(path) = &cfg.messages.insults {
            lists.insults = read_list(path)?;
        }
        Ok(lists)
    }
}

fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn read_list(path: &Path) -> Result<Vec<String>, PolicyError> {
    std::fs::read_to_string(path)
        .map(|t| parse_list(&t))
        .map_err(|source| PolicyError::Io { path: path.to_path_buf(), source })
}

/// Text shown after `bash: <cmd>: ` for an errno entry such as
/// `EACCES: Permission denied`.
pub fn errno_description(entry: &str) -> &str {
    match entry.split_once(": ") {
        Some((symbol, rest)) if symbol.starts_with('E') && symbol.chars().all(|c| c.is_ascii_alphanumeric()) => rest,
        _ => entry,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action: DefenderAction,
    pub message: Option<String>,
    /// 1-based index of this decision within its session.
    pub sequence_number: u64,
}

/// A validated policy together with its message lists; immutable and
/// shareable across sessions.
#[derive(Debug, Clone)]
pub struct Policy {
    config: PolicyConfig,
    messages: Arc<MessageLists>,
}

impl Policy {
    pub fn new(config: PolicyConfig, messages: MessageLists) -> Result<Self, PolicyError> {
        config.probabilities.validate()?;
        for (action, list) in [(DefenderAction::Block, &messages.errno), (DefenderAction::Insult, &messages.insults)] {
            if config.probabilities.get(action) > 0.0 && list.is_empty() {
                return Err(PolicyError::EmptyMessages(action));
            }
        }
        Ok(Self { config, messages: Arc::new(messages) })
    }

    pub fn load(config: PolicyConfig) -> Result<Self, PolicyError> {
        let messages = MessageLists::for_config(&config)?;
        Self::new(config, messages)
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn messages(&self) -> &MessageLists {
        &self.messages
    }

    /// Stream for one session. Without a configured seed the stream is
    /// seeded from the operating system.
    pub fn stream(&self, session_id: &str) -> PolicyStream {
        let rng = match self.config.seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_id(session_id));
                rng
            }
            None => ChaCha8Rng::from_os_rng(),
        };
        PolicyStream { rng, drawn: 0 }
    }

    pub fn decide(&self, stream: &mut PolicyStream) -> PolicyDecision {
        stream.drawn += 1;
        let probs = &self.config.probabilities;
        let u: f64 = stream.rng.random();
        let action = pick(probs, u);
        let message = match action {
            DefenderAction::Allow => None,
            DefenderAction::Block => Some(choose(&mut stream.rng, &self.messages.errno)),
            DefenderAction::Insult => Some(choose(&mut stream.rng, &self.messages.insults)),
        };
        PolicyDecision { action, message, sequence_number: stream.drawn }
    }
}

fn pick(probs: &ActionProbabilities, u: f64) -> DefenderAction {
    let mut cumulative = 0.0;
    let mut last = DefenderAction::Allow;
    for action in DefenderAction::ALL {
        let p = probs.get(action);
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last = action;
        if u < cumulative {
            return action;
        }
    }
    last
}

fn choose(rng: &mut ChaCha8Rng, list: &[String]) -> String {
    list[rng.random_range(0..list.len())].clone()
}

fn stream_id(session_id: &str) -> u64 {
    let hex: String = session_id.chars().filter(char::is_ascii_hexdigit).take(16).collect();
    u64::from_str_radix(&hex, 16).unwrap_or_else(|_| {
        session_id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x1000_0000_01b3))
    })
}

/// Per-session random state for [`Policy::decide`].
pub struct PolicyStream {
    rng: ChaCha8Rng,
    drawn: u64,
}

impl PolicyStream {
    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

impl fmt::Debug for PolicyStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyStream").field("drawn", &self.drawn).finish_non_exhaustive()
    }
}
