//! Inbound connections: credential checks, per-address banning and the TCP
//! line-protocol listener.

mod auth;
mod server;
#[cfg(feature = "ssh")]
mod ssh;

pub use auth::{
    authenticate, rate_limit_check, AuthOutcome, BanConfig, BanState, Credential, CredentialError, CredentialStore,
    RateDecision,
};
pub use server::{
    run_connection, serve, Gate, ReadResult, ServeConfig, ServeError, ServiceHandle, TcpTerminal, Terminal,
    TransportMode, BANNER,
};
