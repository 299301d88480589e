//! The attacker/defender deception game: a two-type Bayesian game where
//! nature draws a deceptive (honeypot) or production defender, the attacker
//! decides to attack or resign without seeing the type, and the defender
//! answers an attack by allowing, blocking or (honeypot only) insulting.

mod belief;
mod build;
mod reward;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use belief::{bayes_update, BeliefState};
pub use build::{build_game, build_game_with, OutcomeRow, OutcomeTable, TermMask};
pub use reward::{seu_attacker, seu_defender_deceptive, seu_defender_production, RewardParams, Weighted};
pub use tree::{ChanceBranch, GameSpec, InfoSet, Node, NodeKind, GAME_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum GameError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} = {value} is not finite")]
    NonFinite { name: &'static str, value: f64 },
    #[error("belief does not sum to one (sum = {sum})")]
    Normalization { sum: f64 },
    #[error("posterior undefined: evidence has zero probability")]
    UndefinedPosterior,
    #[error("malformed game: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerId {
    Attacker,
    Defender,
}

impl PlayerId {
    pub const ALL: [PlayerId; 2] = [PlayerId::Attacker, PlayerId::Defender];

    pub fn index(self) -> usize {
        match self {
            PlayerId::Attacker => 0,
            PlayerId::Defender => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldState {
    Deceptive,
    Production,
}

impl WorldState {
    pub const ALL: [WorldState; 2] = [WorldState::Deceptive, WorldState::Production];

    /// Responses available to the defender of this type. Only a deceptive
    /// defender can insult.
    pub fn defender_actions(self) -> &'static [DefenderAction] {
        match self {
            WorldState::Deceptive => &DefenderAction::ALL,
            WorldState::Production => &[DefenderAction::Allow, DefenderAction::Block],
        }
    }
}

impl BeliefState {
    pub fn prob(&self, state: WorldState) -> f64 {
        match state {
            WorldState::Deceptive => self.p_deceptive(),
            WorldState::Production => self.p_production(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerAction {
    Attack,
    Resign,
}

impl AttackerAction {
    pub const ALL: [AttackerAction; 2] = [AttackerAction::Attack, AttackerAction::Resign];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefenderAction {
    Allow,
    Block,
    Insult,
}

impl DefenderAction {
    pub const ALL: [DefenderAction; 3] =
        [DefenderAction::Allow, DefenderAction::Block, DefenderAction::Insult];

    pub fn as_str(self) -> &'static str {
        match self {
            DefenderAction::Allow => "allow",
            DefenderAction::Block => "block",
            DefenderAction::Insult => "insult",
        }
    }
}

macro_rules! display_lowercase {
    ($($ty:ident { $($variant:ident => $name:literal),+ }),+) => {$(
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!("unknown {}: {other}", stringify!($ty))),
                }
            }
        }
    )+};
}

display_lowercase! {
    PlayerId { Attacker => "attacker", Defender => "defender" },
    WorldState { Deceptive => "deceptive", Production => "production" },
    AttackerAction { Attack => "attack", Resign => "resign" },
    DefenderAction { Allow => "allow", Block => "block", Insult => "insult" }
}
