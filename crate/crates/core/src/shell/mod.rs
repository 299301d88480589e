//! Medium-interaction shell: fake filesystem, command emulation, policy
//! dispatch, download capture and session time limits.

mod capture;
mod commands;
mod config;
mod fs;
mod parse;
mod session;

use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use capture::{CaptureRecord, CaptureStore, Fetcher};
pub use commands::{FsOp, SideEffect};
pub use config::{parse_mode, ConfigError, DirEntry, FileEntry, ShellConfig, MAX_COMMAND_DELAY};
pub use fs::{
    build_default_fs, build_fs, display_path, resolve, FakeFs, FakeFsNode, FsError, FsPath, Meta, NodeKind,
    DEFAULT_USERS,
};
pub use parse::{parse_line, program_name, CommandLine, Connector, ParseError, Redirect, SimpleCommand};
pub use session::{CloseReason, CommandOutcome, SessionError, SessionState, ShellSession, CAP_MESSAGE, IDLE_MESSAGE};

use crate::clock::{seconds_between, SharedClock};
use crate::log::{SessionEvent, SessionSummary, SharedSink, CLOSED, CONNECT, LOGIN_FAILED, LOGIN_SUCCESS};
use crate::policy::Policy;

struct Inner {
    config: ShellConfig,
    template: FakeFs,
    policy: Policy,
    sink: SharedSink,
    clock: SharedClock,
    capture: CaptureStore,
    instance: String,
    ids: Mutex<ChaCha8Rng>,
}

/// Everything sessions of one honeypot instance share. Cheap to clone.
#[derive(Clone)]
pub struct Honeypot {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Honeypot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Honeypot").field("instance", &self.inner.instance).finish_non_exhaustive()
    }
}

pub struct HoneypotBuilder {
    config: ShellConfig,
    policy: Policy,
    sink: SharedSink,
    clock: SharedClock,
    capture: CaptureStore,
    instance: String,
    id_seed: Option<u64>,
}

impl HoneypotBuilder {
    pub fn config(mut self, config: ShellConfig) -> Self {
        self.config = config;
        self
    }

    pub fn capture(mut self, capture: CaptureStore) -> Self {
        self.capture = capture;
        self
    }

    pub fn instance(mut self, label: &str) -> Self {
        self.instance = label.to_string();
        self
    }

    /// Makes session ids reproducible.
    pub fn id_seed(mut self, seed: u64) -> Self {
        self.id_seed = Some(seed);
        self
    }

    pub fn build(self) -> Result<Honeypot, ConfigError> {
        let template = self.config.build_template()?;
        let ids = match self.id_seed {
            Some(seed) => ChaCha8Rng::seed_from_u64(seed),
            None => ChaCha8Rng::from_os_rng(),
        };
        Ok(Honeypot {
            inner: Arc::new(Inner {
                config: self.config,
                template,
                policy: self.policy,
                sink: self.sink,
                clock: self.clock,
                capture: self.capture,
                instance: self.instance,
                ids: Mutex::new(ids),
            }),
        })
    }
}

impl Honeypot {
    /// Defaults: stock shell config, offline downloads, instance label taken
    /// from the policy name, random session ids.
    pub fn builder(policy: Policy, sink: SharedSink, clock: SharedClock) -> HoneypotBuilder {
        HoneypotBuilder {
            instance: policy.config().name.clone(),
            config: ShellConfig::default(),
            policy,
            sink,
            clock,
            capture: CaptureStore::offline(),
            id_seed: None,
        }
    }

    pub fn config(&self) -> &ShellConfig {
        &self.inner.config
    }

    pub fn template(&self) -> &FakeFs {
        &self.inner.template
    }

    pub fn policy(&self) -> &Policy {
        &self.inner.policy
    }

    pub fn clock(&self) -> &SharedClock {
        &self.inner.clock
    }

    pub fn capture(&self) -> &CaptureStore {
        &self.inner.capture
    }

    pub fn instance(&self) -> &str {
        &self.inner.instance
    }

    pub fn sink(&self) -> &SharedSink {
        &self.inner.sink
    }

    pub(crate) fn emit(&self, event: &SessionEvent) {
        if let Err(e) = self.inner.sink.append(event) {
            log::error!("dropping {} event for session {}: {e}", event.eventid, event.session);
        }
    }

    fn next_id(&self) -> String {
        let mut bytes = [0u8; 16];
        self.inner.ids.lock().unwrap().fill_bytes(&mut bytes);
        hex::encode(bytes)
    }

    /// Registers an inbound connection; logs the connect event.
    pub fn connect(&self, src_ip: &str) -> Connection {
        let id = self.next_id();
        let at = self.inner.clock.now();
        self.emit(&SessionEvent::new(CONNECT, &id, src_ip, at, self.instance()));
        Connection { hp: self.clone(), id, src_ip: src_ip.to_string(), connected_at: at, open: true }
    }

    /// Connect and successful login in one step.
    pub fn open_session(&self, user: &str, src_ip: &str) -> ShellSession {
        self.connect(src_ip).login(user)
    }
}

/// A connection that has not logged in yet.
#[derive(Debug)]
pub struct Connection {
    hp: Honeypot,
    id: String,
    src_ip: String,
    connected_at: DateTime<Utc>,
    open: bool,
}

impl Connection {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn src_ip(&self) -> &str {
        &self.src_ip
    }

    fn event(&self, eventid: &str) -> SessionEvent {
        SessionEvent::new(eventid, &self.id, &self.src_ip, self.hp.clock().now(), self.hp.instance())
    }

    pub fn login_failed(&self, user: &str, password: &str) {
        let mut e = self.event(LOGIN_FAILED);
        e.username = Some(user.to_string());
        e.password = Some(password.to_string());
        self.hp.emit(&e);
    }

    pub fn login(mut self, user: &str) -> ShellSession {
        let mut e = self.event(LOGIN_SUCCESS);
        e.username = Some(user.to_string());
        self.hp.emit(&e);
        self.open = false;
        ShellSession::new(self.hp.clone(), self.id.clone(), user, &self.src_ip, e.timestamp)
    }

    /// Ends a connection that never logged in.
    pub fn close(mut self, reason: CloseReason) -> SessionSummary {
        self.finish(reason)
    }

    fn finish(&mut self, reason: CloseReason) -> SessionSummary {
        self.open = false;
        let at = self.hp.clock().now();
        let duration = seconds_between(self.connected_at, at).max(0.0);
        let mut e = self.event(CLOSED);
        e.reason = Some(reason.to_string());
        e.duration = Some(duration);
        self.hp.emit(&e);
        SessionSummary {
            session_id: self.id.clone(),
            instance: self.hp.instance().to_string(),
            src_ip: self.src_ip.clone(),
            duration_seconds: duration,
            command_count: 0,
            login_success: false,
            close_reason: Some(reason.to_string()),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if self.open {
            self.finish(CloseReason::Error);
        }
    }
}

#[cfg(test)]
mod tests;
