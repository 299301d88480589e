//! Scripted attacker personas that log in to a honeypot and react to what
//! they see, for generating realistic logs without live attackers.

mod endpoint;
mod persona;
mod run;

pub use endpoint::{AttackSession, Endpoint, InProcessEndpoint, Reply, TcpEndpoint};
pub use persona::{
    builtin_personas, persona_by_name, Classifier, OutcomeClass, Persona, PersonaError, Reaction, Step,
    INSULT_BACK, REPEATER_COMMANDS,
};
pub use run::{
    run_campaign, run_persona, CampaignResult, CampaignSpec, Disconnect, ThinkTime, Transcript, TranscriptEntry,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("i/o error talking to the honeypot: {0}")]
    Io(#[source] std::io::Error),
    #[error("connection refused before the login prompt")]
    Refused,
    #[error("login rejected")]
    Auth,
    #[error("session closed unexpectedly")]
    Closed,
    #[error("no endpoint for instance {0:?}")]
    MissingEndpoint(String),
    #[error("campaign needs at least one persona with non-zero weight")]
    NoPersonas,
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("a campaign worker panicked")]
    Panicked,
}

#[cfg(test)]
mod tests;
