//! SSH front end. Password logins go through the same [`Gate`] as the line
//! protocol, and shell or exec channels run the shared command loop on a
//! thread of their own.

use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::RngCore;
use russh::keys::ssh_key::private::Ed25519Keypair;
use russh::keys::ssh_key::LineEnding;
use russh::keys::PrivateKey;
use russh::server::{Auth, Handle, Msg, Server, Session};
use russh::{Channel, ChannelId, SshId};

use super::auth::{authenticate, AuthOutcome, RateDecision};
use super::server::{run_shell, Gate, ReadResult, ServeConfig, ServeError, Terminal, MAX_LINE};
use crate::shell::{CloseReason, Connection, Honeypot, ShellSession};

const SERVER_ID: &str = "SSH-2.0-OpenSSH_8.9p1 Ubuntu-3ubuntu0.4";

type Workers = Arc<Mutex<Vec<JoinHandle<()>>>>;

/// Reads the host key at `path`, or creates one (and saves it there).
fn load_or_create_host_key(path: Option<&Path>) -> Result<PrivateKey, ServeError> {
    if let Some(p) = path.filter(|p| p.exists()) {
        return PrivateKey::read_openssh_file(p).map_err(|e| ServeError::HostKey(format!("{}: {e}", p.display())));
    }
    let mut seed = [0u8; 32];
    rand::rng().fill_bytes(&mut seed);
    let key = PrivateKey::from(Ed25519Keypair::from_seed(&seed));
    if let Some(p) = path {
        key.write_openssh_file(p, LineEnding::LF)
            .map_err(|e| ServeError::HostKey(format!("{}: {e}", p.display())))?;
    }
    Ok(key)
}

#[derive(Clone)]
struct Shared {
    hp: Honeypot,
    gate: Arc<Gate>,
    shutdown: Arc<AtomicBool>,
    workers: Workers,
    poll: Duration,
    rt: tokio::runtime::Handle,
}

pub(super) fn spawn(
    listener: TcpListener,
    config: &ServeConfig,
    shutdown: Arc<AtomicBool>,
    workers: Workers,
) -> Result<JoinHandle<()>, ServeError> {
    let key = load_or_create_host_key(config.host_key.as_deref())?;
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let ssh = Arc::new(russh::server::Config {
        server_id: SshId::Standard(SERVER_ID.into()),
        keys: vec![key],
        inactivity_timeout: Some(config.honeypot.config().idle_timeout()),
        auth_rejection_time: Duration::from_millis(500),
        auth_rejection_time_initial: Some(Duration::ZERO),
        max_auth_attempts: config.gate.max_attempts.max(1) + 1,
        ..Default::default()
    });
    let shared = Shared {
        hp: config.honeypot.clone(),
        gate: config.gate.clone(),
        shutdown,
        workers,
        poll: config.poll_interval,
        rt: rt.handle().clone(),
    };
    let handle = std::thread::Builder::new().name("ssh-accept".into()).spawn(move || {
        let result = rt.block_on(async {
            let socket = tokio::net::TcpListener::from_std(listener)?;
            let mut server = SshServer(shared.clone());
            let running = server.run_on_socket(ssh, &socket);
            let stop = running.handle();
            let (flag, poll) = (shared.shutdown.clone(), shared.poll);
            tokio::spawn(async move {
                while !flag.load(Ordering::SeqCst) {
                    tokio::time::sleep(poll).await;
                }
                stop.shutdown("shutting down".into());
            });
            running.await
        });
        if let Err(e) = result {
            log::error!("ssh listener failed: {e}");
        }
        // sessions still need the runtime to send their last output
        loop {
            let pending = std::mem::take(&mut *shared.workers.lock().unwrap());
            if pending.is_empty() {
                break;
            }
            for w in pending {
                let _ = w.join();
            }
        }
        rt.shutdown_timeout(Duration::from_secs(1));
    })?;
    Ok(handle)
}

struct SshServer(Shared);

impl Server for SshServer {
    type Handler = Client;

    fn new_client(&mut self, peer: Option<SocketAddr>) -> Client {
        let ip = peer.map_or_else(|| "unknown".to_string(), |p| p.ip().to_string());
        let shared = self.0.clone();
        let banned = matches!(shared.gate.bans.check(&ip, shared.hp.clock().now()), RateDecision::Banned { .. });
        if banned {
            log::info!("refusing banned {ip}");
        }
        let conn = (!banned).then(|| shared.hp.connect(&ip));
        Client { shared, ip, conn, attempts: 0, shell: None, pty: false, input: None }
    }
}

struct Client {
    shared: Shared,
    ip: String,
    conn: Option<Connection>,
    attempts: usize,
    shell: Option<ShellSession>,
    pty: bool,
    input: Option<Sender<Vec<u8>>>,
}

impl Client {
    fn refuse(&mut self) -> russh::Error {
        if let Some(conn) = self.conn.take() {
            conn.close(CloseReason::ClientExit);
        }
        russh::Error::Disconnect
    }

    /// Starts the command loop for `channel`; `command` runs one line and
    /// closes instead of opening an interactive shell.
    fn start(&mut self, channel: ChannelId, session: &mut Session, command: Option<String>) -> Result<(), russh::Error> {
        let Some(shell) = self.shell.take() else {
            session.channel_failure(channel)?;
            return Ok(());
        };
        session.channel_success(channel)?;
        let (tx, rx) = mpsc::channel();
        let interactive = command.is_none();
        if let Some(cmd) = command {
            let _ = tx.send(format!("{cmd}\n").into_bytes());
        } else {
            self.input = Some(tx);
        }
        let shared = self.shared.clone();
        let handle = session.handle();
        let echo = self.pty && interactive;
        let crlf = self.pty;
        let spawned = std::thread::Builder::new().name(format!("ssh-{}", self.ip)).spawn(move || {
            let mut term = SshTerminal::new(rx, handle.clone(), channel, shared.rt.clone(), echo, crlf);
            if let Err(e) = run_shell(&shared.hp, shell, &mut term, &shared.shutdown, shared.poll, interactive) {
                log::debug!("ssh session ended with {e}");
            }
            shared.rt.block_on(async {
                let _ = handle.exit_status_request(channel, 0).await;
                let _ = handle.eof(channel).await;
                let _ = handle.close(channel).await;
            });
        });
        match spawned {
            Ok(h) => {
                let mut w = self.shared.workers.lock().unwrap();
                w.retain(|h| !h.is_finished());
                w.push(h);
            }
            Err(e) => log::error!("cannot spawn session thread: {e}"),
        }
        Ok(())
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        self.input = None;
        let reason =
            if self.shared.shutdown.load(Ordering::SeqCst) { CloseReason::Error } else { CloseReason::ClientExit };
        if let Some(conn) = self.conn.take() {
            conn.close(reason);
        }
        if let Some(mut shell) = self.shell.take() {
            let _ = shell.close(reason);
        }
        let _ = self.shared.hp.sink().flush();
    }
}

impl russh::server::Handler for Client {
    type Error = russh::Error;

    async fn auth_password(&mut self, user: &str, password: &str) -> Result<Auth, Self::Error> {
        let Some(conn) = &self.conn else { return Err(russh::Error::Disconnect) };
        let gate = &self.shared.gate;
        let now = self.shared.hp.clock().now();
        match authenticate(&gate.credentials, &gate.bans, user, password, &self.ip, now) {
            AuthOutcome::Accept => {
                self.shell = self.conn.take().map(|c| c.login(user));
                Ok(Auth::Accept)
            }
            AuthOutcome::Reject => {
                conn.login_failed(user, password);
                self.attempts += 1;
                let banned = matches!(gate.bans.check(&self.ip, now), RateDecision::Banned { .. });
                if banned || self.attempts >= gate.max_attempts.max(1) {
                    return Err(self.refuse());
                }
                Ok(Auth::reject())
            }
            AuthOutcome::Banned { .. } => {
                conn.login_failed(user, password);
                Err(self.refuse())
            }
        }
    }

    async fn channel_open_session(
        &mut self,
        _channel: Channel<Msg>,
        reply: russh::server::ChannelOpenHandle,
        _session: &mut Session,
    ) -> Result<(), Self::Error> {
        if self.shell.is_some() {
            reply.accept().await;
        }
        Ok(())
    }

    async fn pty_request(
        &mut self,
        channel: ChannelId,
        _term: &str,
        _cols: u32,
        _rows: u32,
        _pix_width: u32,
        _pix_height: u32,
        _modes: &[(russh::Pty, u32)],
        session: &mut Session,
    ) -> Result<(), Self::Error> {
        self.pty = true;
        session.channel_success(channel)?;
        Ok(())
    }

    async fn shell_request(&mut self, channel: ChannelId, session: &mut Session) -> Result<(), Self::Error> {
        self.start(channel, session, None)
    }

    async fn exec_request(&mut self, channel: ChannelId, data: &[u8], session: &mut Session) -> Result<(), Self::Error> {
        self.start(channel, session, Some(String::from_utf8_lossy(data).into_owned()))
    }

    async fn data(&mut self, _channel: ChannelId, data: &[u8], _session: &mut Session) -> Result<(), Self::Error> {
        if let Some(tx) = &self.input {
            let _ = tx.send(data.to_vec());
        }
        Ok(())
    }

    async fn channel_eof(&mut self, _channel: ChannelId, _session: &mut Session) -> Result<(), Self::Error> {
        self.input = None;
        Ok(())
    }

    async fn channel_close(&mut self, _channel: ChannelId, _session: &mut Session) -> Result<(), Self::Error> {
        self.input = None;
        Ok(())
    }
}

/// Line discipline over an SSH channel. With a pty the client sends raw
/// keystrokes, so input is echoed and edited here.
struct SshTerminal {
    rx: Receiver<Vec<u8>>,
    handle: Handle,
    channel: ChannelId,
    rt: tokio::runtime::Handle,
    echo: bool,
    crlf: bool,
    lines: VecDeque<String>,
    current: Vec<u8>,
    escape: Escape,
    after_cr: bool,
    eof: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Escape {
    None,
    Start,
    Sequence,
}

impl SshTerminal {
    fn new(rx: Receiver<Vec<u8>>, handle: Handle, channel: ChannelId, rt: tokio::runtime::Handle, echo: bool, crlf: bool) -> Self {
        Self {
            rx,
            handle,
            channel,
            rt,
            echo,
            crlf,
            lines: VecDeque::new(),
            current: Vec::new(),
            escape: Escape::None,
            after_cr: false,
            eof: false,
        }
    }

    fn finish_line(&mut self) {
        let bytes = std::mem::take(&mut self.current);
        self.lines.push_back(String::from_utf8_lossy(&bytes).into_owned());
    }

    /// Consumes client bytes, returning what should be echoed back.
    fn feed(&mut self, bytes: &[u8]) -> Vec<u8> {
        let mut echo = Vec::new();
        for &b in bytes {
            let after_cr = std::mem::replace(&mut self.after_cr, false);
            match self.escape {
                Escape::Start => {
                    self.escape = if b == b'[' || b == b'O' { Escape::Sequence } else { Escape::None };
                    continue;
                }
                Escape::Sequence => {
                    if (0x40..=0x7e).contains(&b) {
                        self.escape = Escape::None;
                    }
                    continue;
                }
                Escape::None => {}
            }
            match b {
                b'\n' if after_cr => {}
                b'\r' | b'\n' => {
                    self.after_cr = b == b'\r';
                    self.finish_line();
                    echo.extend_from_slice(b"\r\n");
                }
                0x7f | 0x08 if self.echo => {
                    if !self.current.is_empty() {
                        // drop a whole UTF-8 character
                        while let Some(c) = self.current.pop() {
                            if c & 0xc0 != 0x80 {
                                break;
                            }
                        }
                        echo.extend_from_slice(b"\x08 \x08");
                    }
                }
                0x03 if self.echo => {
                    self.current.clear();
                    self.finish_line();
                    echo.extend_from_slice(b"^C\r\n");
                }
                0x04 if self.echo && self.current.is_empty() => self.eof = true,
                0x1b if self.echo => self.escape = Escape::Start,
                _ => {
                    self.current.push(b);
                    if b >= 0x20 {
                        echo.push(b);
                    }
                    if self.current.len() >= MAX_LINE {
                        self.finish_line();
                    }
                }
            }
        }
        echo
    }

    fn send(&mut self, data: Vec<u8>) -> io::Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        let (handle, channel) = (self.handle.clone(), self.channel);
        self.rt
            .block_on(async move { handle.data(channel, data).await })
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "ssh channel closed"))
    }
}

impl Terminal for SshTerminal {
    fn read_line(&mut self, wait: Duration) -> io::Result<ReadResult> {
        let deadline = Instant::now() + wait;
        loop {
            if let Some(line) = self.lines.pop_front() {
                return Ok(ReadResult::Line(line));
            }
            if self.eof {
                if self.current.is_empty() {
                    return Ok(ReadResult::Eof);
                }
                self.finish_line();
                continue;
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(bytes) => {
                    let echo = self.feed(&bytes);
                    if self.echo {
                        self.send(echo)?;
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Ok(ReadResult::Timeout),
                Err(RecvTimeoutError::Disconnected) => self.eof = true,
            }
        }
    }

    fn write(&mut self, text: &str) -> io::Result<()> {
        let text = if self.crlf { text.replace('\n', "\r\n") } else { text.to_string() };
        self.send(text.into_bytes())
    }
}
