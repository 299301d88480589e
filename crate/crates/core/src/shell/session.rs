use std::fmt;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::commands::{execute_line, Ctx, SideEffect};
use super::config::MAX_COMMAND_DELAY;
use super::fs::FakeFs;
use super::parse::{parse_line, program_name};
use super::Honeypot;
use crate::clock::{seconds_between, to_delta};
use crate::game::DefenderAction;
use crate::log::{SessionEvent, SessionSummary, CLOSED, COMMAND_INPUT, DOWNLOAD, POLICY_ACTION};
use crate::policy::{errno_description, PolicyDecision, PolicyStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloseReason {
    ClientExit,
    Timeout,
    Cap,
    Error,
}

impl CloseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CloseReason::ClientExit => "client-exit",
            CloseReason::Timeout => "timeout",
            CloseReason::Cap => "cap",
            CloseReason::Error => "error",
        }
    }
}

impl fmt::Display for CloseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session is closed")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    /// `None` for blank lines and for `exit`/`logout`, which never reach the
    /// policy.
    pub decision: Option<PolicyDecision>,
    pub output: String,
    pub side_effects: Vec<SideEffect>,
    pub session_terminated: bool,
}

impl CommandOutcome {
    fn plain(output: &str, terminated: bool) -> Self {
        Self { decision: None, output: output.to_string(), side_effects: Vec::new(), session_terminated: terminated }
    }
}

pub const IDLE_MESSAGE: &str = "\ntimed out waiting for input: auto-logout\n";
pub const CAP_MESSAGE: &str = "\nConnection closed by foreign host.\n";

/// One logged-in shell. Commands are handled strictly in order.
#[derive(Debug)]
pub struct ShellSession {
    hp: Honeypot,
    id: String,
    user: String,
    home: String,
    src_ip: String,
    start_time: DateTime<Utc>,
    last_activity: DateTime<Utc>,
    cwd: String,
    command_count: u64,
    state: SessionState,
    fs: FakeFs,
    stream: PolicyStream,
    history: Vec<String>,
    summary: Option<SessionSummary>,
}

impl ShellSession {
    pub(super) fn new(hp: Honeypot, id: String, user: &str, src_ip: &str, start: DateTime<Utc>) -> Self {
        let mut fs = hp.template().clone();
        let home = format!("/home/{user}");
        let home_path = super::fs::resolve("/", "/", &home);
        if fs.get(&home_path).is_none() {
            fs.insert(&home_path, super::fs::FakeFsNode::dir("", user, 0o755, start));
        }
        let stream = hp.policy().stream(&id);
        Self {
            hp,
            id,
            user: user.to_string(),
            cwd: home.clone(),
            home,
            src_ip: src_ip.to_string(),
            start_time: start,
            last_activity: start,
            command_count: 0,
            state: SessionState::Open,
            fs,
            stream,
            history: Vec::new(),
            summary: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn src_ip(&self) -> &str {
        &self.src_ip
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn last_activity(&self) -> DateTime<Utc> {
        self.last_activity
    }

    pub fn working_directory(&self) -> &str {
        &self.cwd
    }

    pub fn command_count(&self) -> u64 {
        self.command_count
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }

    pub fn fs(&self) -> &FakeFs {
        &self.fs
    }

    /// Summary produced when the session closed.
    pub fn summary(&self) -> Option<&SessionSummary> {
        self.summary.as_ref()
    }

    pub fn prompt(&self) -> String {
        let shown = match self.cwd.strip_prefix(&self.home) {
            Some(rest) => format!("~{rest}"),
            None => self.cwd.clone(),
        };
        format!("{}@{}:{}$ ", self.user, self.hp.config().hostname, shown)
    }

    pub fn idle_deadline(&self) -> DateTime<Utc> {
        self.last_activity + to_delta(self.hp.config().idle_timeout())
    }

    pub fn cap_deadline(&self) -> DateTime<Utc> {
        self.start_time + to_delta(self.hp.config().session_cap())
    }

    fn event(&self, eventid: &str, at: DateTime<Utc>) -> SessionEvent {
        SessionEvent::new(eventid, &self.id, &self.src_ip, at, self.hp.instance())
    }

    /// Closes the session if a time limit has passed, dating the close at
    /// the moment the limit was reached. Called between commands and by
    /// watchdogs.
    pub fn poll(&mut self) -> Option<SessionSummary> {
        if !self.is_open() {
            return None;
        }
        let now = self.hp.clock().now();
        let idle = self.idle_deadline();
        let cap = self.cap_deadline().max(self.last_activity);
        let due = match (now >= idle, now >= cap) {
            (true, true) if idle <= cap => Some((idle, CloseReason::Timeout)),
            (_, true) => Some((cap, CloseReason::Cap)),
            (true, false) => Some((idle, CloseReason::Timeout)),
            (false, false) => None,
        };
        due.map(|(at, reason)| self.close_at(at, reason))
    }

    pub fn handle_line(&mut self, line: &str) -> Result<CommandOutcome, SessionError> {
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        if let Some(summary) = self.poll() {
            let message = if summary.close_reason.as_deref() == Some("cap") { CAP_MESSAGE } else { IDLE_MESSAGE };
            return Ok(CommandOutcome::plain(message, true));
        }
        let now = self.hp.clock().now();
        self.last_activity = now;
        let mut input = self.event(COMMAND_INPUT, now);
        input.input = Some(line.to_string());
        self.hp.emit(&input);

        if line.trim().is_empty() {
            return Ok(CommandOutcome::plain("", false));
        }
        self.command_count += 1;
        self.history.push(line.to_string());

        if is_session_control(line) {
            self.close_at(now, CloseReason::ClientExit);
            return Ok(CommandOutcome::plain("logout\n", true));
        }

        let decision = self.hp.policy().decide(&mut self.stream);
        let mut action = self.event(POLICY_ACTION, now);
        action.action = Some(decision.action.to_string());
        action.message = decision.message.clone();
        action.sequence = Some(decision.sequence_number);
        self.hp.emit(&action);

        let mut outcome = CommandOutcome {
            decision: Some(decision.clone()),
            output: String::new(),
            side_effects: Vec::new(),
            session_terminated: false,
        };
        match decision.action {
            DefenderAction::Allow => self.run_allowed(line, now, &mut outcome),
            DefenderAction::Block => {
                let text = decision.message.as_deref().map(errno_description).unwrap_or("Permission denied");
                outcome.output = format!("bash: {}: {text}\n", program_name(line));
            }
            DefenderAction::Insult => {
                outcome.output = format!("{}\n", decision.message.as_deref().unwrap_or_default());
            }
        }
        Ok(outcome)
    }

    fn run_allowed(&mut self, line: &str, now: DateTime<Utc>, outcome: &mut CommandOutcome) {
        let parsed = match parse_line(line) {
            Ok(p) => p,
            Err(e) => {
                outcome.output = format!("{e}\n");
                return;
            }
        };
        let hp = self.hp.clone();
        let exec = {
            let mut ctx = Ctx {
                fs: &mut self.fs,
                user: &self.user,
                home: &self.home,
                cwd: &mut self.cwd,
                now,
                config: hp.config(),
                capture: hp.capture(),
                history: &self.history,
            };
            execute_line(&mut ctx, &parsed)
        };
        for effect in &exec.effects {
            if let SideEffect::Download(record) = effect {
                let mut e = self.event(DOWNLOAD, now);
                e.url = Some(record.url.clone());
                e.sha256 = record.sha256.clone();
                e.outfile = record.outfile.clone();
                e.message = record.error.clone();
                hp.emit(&e);
            }
        }
        if hp.config().command_delays && !exec.delay.is_zero() {
            hp.clock().sleep(exec.delay.min(MAX_COMMAND_DELAY));
            self.last_activity = hp.clock().now();
        }
        outcome.output = exec.output;
        outcome.side_effects = exec.effects;
        if exec.exit {
            let at = self.last_activity;
            self.close_at(at, CloseReason::ClientExit);
            outcome.session_terminated = true;
        }
    }

    /// Closes at the current clock time.
    pub fn close(&mut self, reason: CloseReason) -> Result<SessionSummary, SessionError> {
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        let now = self.hp.clock().now().max(self.last_activity);
        Ok(self.close_at(now, reason))
    }

    fn close_at(&mut self, at: DateTime<Utc>, reason: CloseReason) -> SessionSummary {
        let duration = seconds_between(self.start_time, at).max(0.0);
        let mut e = self.event(CLOSED, at);
        e.reason = Some(reason.to_string());
        e.duration = Some(duration);
        self.hp.emit(&e);
        self.state = SessionState::Closed;
        let summary = SessionSummary {
            session_id: self.id.clone(),
            instance: self.hp.instance().to_string(),
            src_ip: self.src_ip.clone(),
            duration_seconds: duration,
            command_count: self.command_count,
            login_success: true,
            close_reason: Some(reason.to_string()),
        };
        self.summary = Some(summary.clone());
        summary
    }

    /// Time left before the next limit, for read timeouts.
    pub fn time_to_deadline(&self) -> Duration {
        let now = self.hp.clock().now();
        let next = self.idle_deadline().min(self.cap_deadline().max(self.last_activity));
        (next - now).to_std().unwrap_or(Duration::ZERO)
    }
}

fn is_session_control(line: &str) -> bool {
    let mut words = line.split_whitespace();
    matches!(words.next(), Some("exit" | "logout"))
        && !line.contains([';', '&', '|', '>'])
        && words.all(|w| w.chars().all(|c| c.is_ascii_digit()))
}
