use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::auth::{authenticate, AuthOutcome, BanState, CredentialStore, RateDecision};
use crate::shell::{CloseReason, Honeypot, ShellSession, CAP_MESSAGE, IDLE_MESSAGE};

pub(crate) const MAX_LINE: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    /// Plain text lines over TCP.
    #[default]
    Line,
    Ssh,
}

impl std::str::FromStr for TransportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Self::Line),
            "ssh" => Ok(Self::Ssh),
            other => Err(format!("unknown transport {other:?} (expected line or ssh)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadResult {
    Line(String),
    Timeout,
    Eof,
}

/// A bidirectional text channel to one client. Transports implement this;
/// the login and command loop in [`run_connection`] is shared.
pub trait Terminal {
    /// Waits at most `wait` for a full line (without its terminator).
    fn read_line(&mut self, wait: Duration) -> io::Result<ReadResult>;
    fn write(&mut self, text: &str) -> io::Result<()>;
}

pub struct TcpTerminal {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pending: Vec<u8>,
}

impl TcpTerminal {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        let writer = stream.try_clone()?;
        Ok(Self { reader: BufReader::new(stream), writer, pending: Vec::new() })
    }

    fn take_line(&mut self) -> String {
        let mut bytes = std::mem::take(&mut self.pending);
        while matches!(bytes.last(), Some(b'\n' | b'\r')) {
            bytes.pop();
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

impl Terminal for TcpTerminal {
    fn read_line(&mut self, wait: Duration) -> io::Result<ReadResult> {
        self.reader.get_ref().set_read_timeout(Some(wait.max(Duration::from_millis(1))))?;
        match (&mut self.reader).take(MAX_LINE as u64).read_until(b'\n', &mut self.pending) {
            Ok(0) if self.pending.is_empty() => Ok(ReadResult::Eof),
            Ok(0) => Ok(ReadResult::Line(self.take_line())),
            Ok(_) if self.pending.ends_with(b"\n") || self.pending.len() >= MAX_LINE => {
                Ok(ReadResult::Line(self.take_line()))
            }
            Ok(_) => Ok(ReadResult::Timeout),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Ok(ReadResult::Timeout)
            }
            Err(e) => Err(e),
        }
    }

    fn write(&mut self, text: &str) -> io::Result<()> {
        self.writer.write_all(text.as_bytes())?;
        self.writer.flush()
    }
}

/// Credentials, ban bookkeeping and the per-connection attempt limit.
#[derive(Debug)]
pub struct Gate {
    pub credentials: CredentialStore,
    pub bans: BanState,
    pub max_attempts: usize,
}

impl Gate {
    pub fn new(credentials: CredentialStore, bans: BanState) -> Self {
        Self { credentials, bans, max_attempts: 3 }
    }
}

pub const BANNER: &str = "Ubuntu 22.04.3 LTS\n\n";

pub(crate) const MOTD: &str = "Welcome to Ubuntu 22.04.3 LTS (GNU/Linux 5.15.0-86-generic x86_64)\n\n * Documentation:  https://help.ubuntu.com\n\nLast login: Tue Nov 14 09:12:44 2023 from 10.0.3.17\n";

/// Drives one client from login to close. Returns once the session or
/// connection has been closed and logged.
pub fn run_connection(
    hp: &Honeypot,
    gate: &Gate,
    term: &mut dyn Terminal,
    src_ip: &str,
    shutdown: &AtomicBool,
    poll: Duration,
) -> io::Result<()> {
    let clock = hp.clock().clone();
    if let RateDecision::Banned { until } = gate.bans.check(src_ip, clock.now()) {
        log::info!("refusing banned {src_ip} (until {until})");
        return Ok(());
    }
    let conn = hp.connect(src_ip);
    let login_deadline = clock.now() + crate::clock::to_delta(hp.config().idle_timeout());
    term.write(BANNER)?;

    let read = |term: &mut dyn Terminal, prompt: &str| -> io::Result<Option<String>> {
        term.write(prompt)?;
        loop {
            if shutdown.load(Ordering::SeqCst) || clock.now() >= login_deadline {
                return Ok(None);
            }
            match term.read_line(poll)? {
                ReadResult::Line(l) => return Ok(Some(l)),
                ReadResult::Timeout => continue,
                ReadResult::Eof => return Ok(None),
            }
        }
    };

    let mut user = None;
    for _ in 0..gate.max_attempts.max(1) {
        let (Some(name), Some(password)) = (read(term, "login: ")?, read(term, "Password: ")?) else {
            break;
        };
        match authenticate(&gate.credentials, &gate.bans, &name, &password, src_ip, clock.now()) {
            AuthOutcome::Accept => {
                user = Some(name);
                break;
            }
            AuthOutcome::Reject => {
                conn.login_failed(&name, &password);
                term.write("\nLogin incorrect\n")?;
                if matches!(gate.bans.check(src_ip, clock.now()), RateDecision::Banned { .. }) {
                    break;
                }
            }
            AuthOutcome::Banned { .. } => {
                conn.login_failed(&name, &password);
                break;
            }
        }
    }
    let Some(user) = user else {
        let reason = if shutdown.load(Ordering::SeqCst) { CloseReason::Error } else { CloseReason::ClientExit };
        conn.close(reason);
        hp.sink().flush()?;
        return Ok(());
    };

    run_shell(hp, conn.login(&user), term, shutdown, poll, true)
}

/// Runs the command loop of a logged-in session until it closes, then
/// flushes the log. `interactive` sessions get the MOTD and prompts.
pub(crate) fn run_shell(
    hp: &Honeypot,
    mut session: ShellSession,
    term: &mut dyn Terminal,
    shutdown: &AtomicBool,
    poll: Duration,
    interactive: bool,
) -> io::Result<()> {
    if interactive {
        term.write(MOTD)?;
        term.write(&session.prompt())?;
    }
    let result = loop {
        if shutdown.load(Ordering::SeqCst) {
            let _ = session.close(CloseReason::Error);
            break Ok(());
        }
        if let Some(summary) = session.poll() {
            let msg = if summary.close_reason.as_deref() == Some("cap") { CAP_MESSAGE } else { IDLE_MESSAGE };
            let _ = term.write(msg);
            break Ok(());
        }
        let wait = poll.min(session.time_to_deadline().max(Duration::from_millis(1)));
        match term.read_line(wait) {
            Ok(ReadResult::Line(line)) => {
                let outcome = match session.handle_line(&line) {
                    Ok(o) => o,
                    Err(_) => break Ok(()),
                };
                if let Err(e) = term.write(&outcome.output) {
                    let _ = session.close(CloseReason::Error);
                    break Err(e);
                }
                if outcome.session_terminated {
                    break Ok(());
                }
                if interactive {
                    if let Err(e) = term.write(&session.prompt()) {
                        let _ = session.close(CloseReason::Error);
                        break Err(e);
                    }
                }
            }
            Ok(ReadResult::Timeout) => {}
            Ok(ReadResult::Eof) => {
                let _ = session.close(CloseReason::ClientExit);
                break Ok(());
            }
            Err(e) => {
                let _ = session.close(CloseReason::Error);
                break Err(e);
            }
        }
    };
    hp.sink().flush()?;
    result
}

#[derive(Debug)]
pub struct ServeConfig {
    pub bind: SocketAddr,
    pub transport: TransportMode,
    pub honeypot: Honeypot,
    pub gate: Arc<Gate>,
    /// How often idle connections wake up to check limits and shutdown.
    pub poll_interval: Duration,
    /// SSH host key in OpenSSH format. Created on first use; without a path
    /// every start gets a fresh key.
    pub host_key: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(bind: SocketAddr, honeypot: Honeypot, gate: Gate) -> Self {
        Self {
            bind,
            transport: TransportMode::Line,
            honeypot,
            gate: Arc::new(gate),
            poll_interval: Duration::from_millis(100),
            host_key: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("transport {0:?} is not available in this build")]
    Transport(TransportMode),
    #[error("host key: {0}")]
    HostKey(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A running listener. Dropping the handle shuts the service down.
#[derive(Debug)]
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    workers: Arc<Mutex<Vec<JoinHandle<()>>>>,
    honeypot: Honeypot,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn is_running(&self) -> bool {
        !self.shutdown.load(Ordering::SeqCst)
    }

    /// Stops accepting, closes every open session and flushes the log.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        let workers = std::mem::take(&mut *self.workers.lock().unwrap());
        for w in workers {
            let _ = w.join();
        }
        self.honeypot.sink().flush()
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            let _ = self.stop();
        }
    }
}

pub fn serve(config: ServeConfig) -> Result<ServiceHandle, ServeError> {
    #[cfg(not(feature = "ssh"))]
    if config.transport == TransportMode::Ssh {
        return Err(ServeError::Transport(config.transport));
    }
    let listener = TcpListener::bind(config.bind).map_err(|source| ServeError::Bind { addr: config.bind, source })?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let workers: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();

    #[cfg(feature = "ssh")]
    if config.transport == TransportMode::Ssh {
        let acceptor = super::ssh::spawn(listener, &config, shutdown.clone(), workers.clone())?;
        log::info!("listening for ssh on {addr}");
        return Ok(ServiceHandle { addr, shutdown, acceptor: Some(acceptor), workers, honeypot: config.honeypot });
    }

    let acceptor = {
        let shutdown = shutdown.clone();
        let workers = workers.clone();
        let hp = config.honeypot.clone();
        let gate = config.gate.clone();
        let poll = config.poll_interval;
        std::thread::Builder::new().name("accept".into()).spawn(move || {
            while !shutdown.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let (hp, gate, shutdown) = (hp.clone(), gate.clone(), shutdown.clone());
                        let spawned = std::thread::Builder::new().name(format!("conn-{peer}")).spawn(move || {
                            let ip = peer.ip().to_string();
                            let result = stream
                                .set_nonblocking(false)
                                .and_then(|_| TcpTerminal::new(stream))
                                .and_then(|mut term| run_connection(&hp, &gate, &mut term, &ip, &shutdown, poll));
                            if let Err(e) = result {
                                log::debug!("connection from {peer} ended with {e}");
                            }
                        });
                        match spawned {
                            Ok(handle) => {
                                let mut w = workers.lock().unwrap();
                                w.retain(|h| !h.is_finished());
                                w.push(handle);
                            }
                            Err(e) => log::error!("cannot spawn connection thread: {e}"),
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(poll.min(Duration::from_millis(20))),
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        std::thread::sleep(poll);
                    }
                }
            }
        })?
    };
    log::info!("listening on {addr}");
    Ok(ServiceHandle { addr, shutdown, acceptor: Some(acceptor), workers, honeypot: config.honeypot })
}
