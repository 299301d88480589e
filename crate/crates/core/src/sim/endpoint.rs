use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use super::persona::Classifier;
use super::SimError;
use crate::clock::seconds_between;
use crate::shell::{CloseReason, Honeypot, ShellSession, CAP_MESSAGE, IDLE_MESSAGE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub output: String,
    /// The honeypot ended the session with this reply.
    pub closed: bool,
    /// False when the line arrived after a time limit and was never run.
    pub accepted: bool,
}

/// One logged-in attacker connection.
pub trait AttackSession {
    fn session_id(&self) -> Option<String>;
    fn send(&mut self, line: &str) -> Result<Reply, SimError>;
    /// Waits before the next line, on whatever clock the endpoint runs.
    fn think(&mut self, d: Duration);
    /// Time since login.
    fn elapsed(&self) -> Duration;
    fn disconnect(self: Box<Self>);
}

pub trait Endpoint: Send {
    fn label(&self) -> &str;
    /// Account the attacker logs in as.
    fn username(&self) -> &str;
    fn classifier(&self) -> Classifier {
        Classifier::default()
    }
    fn connect<'a>(&'a mut self, src_ip: &str) -> Result<Box<dyn AttackSession + 'a>, SimError>;
    /// Time passing between two sessions.
    fn idle(&mut self, d: Duration);
    fn finish(&mut self) -> Result<(), SimError> {
        Ok(())
    }
}

/// Drives [`ShellSession`]s directly, on the honeypot's own clock.
#[derive(Debug)]
pub struct InProcessEndpoint {
    hp: Honeypot,
    user: String,
}

impl InProcessEndpoint {
    pub fn new(hp: Honeypot, user: &str) -> Self {
        Self { hp, user: user.to_string() }
    }

    pub fn honeypot(&self) -> &Honeypot {
        &self.hp
    }
}

struct InProcessSession {
    session: ShellSession,
    hp: Honeypot,
}

impl AttackSession for InProcessSession {
    fn session_id(&self) -> Option<String> {
        Some(self.session.id().to_string())
    }

    fn send(&mut self, line: &str) -> Result<Reply, SimError> {
        if let Some(summary) = self.session.poll() {
            let msg = if summary.close_reason.as_deref() == Some("cap") { CAP_MESSAGE } else { IDLE_MESSAGE };
            return Ok(Reply { output: msg.to_string(), closed: true, accepted: false });
        }
        let out = self.session.handle_line(line).map_err(|_| SimError::Closed)?;
        Ok(Reply { output: out.output, closed: out.session_terminated, accepted: true })
    }

    fn think(&mut self, d: Duration) {
        self.hp.clock().sleep(d);
    }

    fn elapsed(&self) -> Duration {
        let secs = seconds_between(self.session.start_time(), self.hp.clock().now()).max(0.0);
        Duration::from_secs_f64(secs)
    }

    fn disconnect(mut self: Box<Self>) {
        if self.session.is_open() && self.session.poll().is_none() {
            let _ = self.session.close(CloseReason::ClientExit);
        }
    }
}

impl Endpoint for InProcessEndpoint {
    fn label(&self) -> &str {
        self.hp.instance()
    }

    fn username(&self) -> &str {
        &self.user
    }

    fn classifier(&self) -> Classifier {
        Classifier::new(self.hp.policy().messages())
    }

    fn connect<'a>(&'a mut self, src_ip: &str) -> Result<Box<dyn AttackSession + 'a>, SimError> {
        let session = self.hp.open_session(&self.user, src_ip);
        Ok(Box::new(InProcessSession { session, hp: self.hp.clone() }))
    }

    fn idle(&mut self, d: Duration) {
        self.hp.clock().sleep(d);
    }

    fn finish(&mut self) -> Result<(), SimError> {
        self.hp.sink().flush().map_err(SimError::Io)
    }
}

/// Talks to a running `serve` instance over the line protocol.
#[derive(Debug, Clone)]
pub struct TcpEndpoint {
    label: String,
    addr: SocketAddr,
    username: String,
    password: String,
    /// Real seconds slept per simulated second of think time.
    pub time_scale: f64,
    pub io_timeout: Duration,
}

impl TcpEndpoint {
    pub fn new(label: &str, addr: SocketAddr, username: &str, password: &str) -> Self {
        Self {
            label: label.to_string(),
            addr,
            username: username.to_string(),
            password: password.to_string(),
            time_scale: 0.0,
            io_timeout: Duration::from_secs(30),
        }
    }
}

struct TcpSession {
    stream: TcpStream,
    seen: String,
    started: Instant,
    time_scale: f64,
}

enum Until {
    Text(&'static str),
    Prompt,
}

impl TcpSession {
    /// Reads until the marker shows up or the peer closes. Returns the text
    /// before the marker and whether the connection is still up.
    fn read_until(&mut self, until: Until) -> Result<(String, bool), SimError> {
        let mut buf = [0u8; 4096];
        loop {
            let found = match until {
                Until::Text(t) => self.seen.find(t).map(|i| (i, i + t.len())),
                Until::Prompt => prompt_at(&self.seen).map(|i| (i, self.seen.len())),
            };
            if let Some((start, end)) = found {
                let before = self.seen[..start].to_string();
                self.seen.drain(..end);
                return Ok((before, true));
            }
            let n = self.stream.read(&mut buf).map_err(SimError::Io)?;
            if n == 0 {
                return Ok((std::mem::take(&mut self.seen), false));
            }
            self.seen.push_str(&String::from_utf8_lossy(&buf[..n]));
        }
    }

    fn line(&mut self, text: &str) -> Result<(), SimError> {
        self.stream.write_all(format!("{text}\r\n").as_bytes()).map_err(SimError::Io)
    }
}

/// Start of a trailing shell prompt such as `user@host:~$ `.
fn prompt_at(text: &str) -> Option<usize> {
    if !text.ends_with("$ ") {
        return None;
    }
    let start = text.rfind('\n').map_or(0, |i| i + 1);
    let tail = &text[start..];
    (tail.contains('@') && tail.contains(':')).then_some(start)
}

impl AttackSession for TcpSession {
    fn session_id(&self) -> Option<String> {
        None
    }

    fn send(&mut self, line: &str) -> Result<Reply, SimError> {
        self.line(line)?;
        let (output, open) = self.read_until(Until::Prompt)?;
        let accepted = open || (output != IDLE_MESSAGE && output != CAP_MESSAGE);
        Ok(Reply { output, closed: !open, accepted })
    }

    fn think(&mut self, d: Duration) {
        if self.time_scale > 0.0 {
            std::thread::sleep(d.mul_f64(self.time_scale));
        }
    }

    fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    fn disconnect(self: Box<Self>) {
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
    }
}

impl Endpoint for TcpEndpoint {
    fn label(&self) -> &str {
        &self.label
    }

    fn username(&self) -> &str {
        &self.username
    }

    fn connect<'a>(&'a mut self, _src_ip: &str) -> Result<Box<dyn AttackSession + 'a>, SimError> {
        let stream = TcpStream::connect_timeout(&self.addr, self.io_timeout).map_err(SimError::Io)?;
        stream.set_read_timeout(Some(self.io_timeout)).map_err(SimError::Io)?;
        let mut s = TcpSession { stream, seen: String::new(), started: Instant::now(), time_scale: self.time_scale };
        if !s.read_until(Until::Text("login: "))?.1 {
            return Err(SimError::Refused);
        }
        s.line(&self.username)?;
        s.read_until(Until::Text("Password: "))?;
        s.line(&self.password)?;
        let (text, open) = s.read_until(Until::Prompt)?;
        if !open || text.contains("Login incorrect") {
            return Err(SimError::Auth);
        }
        s.started = Instant::now();
        Ok(Box::new(s))
    }

    fn idle(&mut self, d: Duration) {
        if self.time_scale > 0.0 {
            std::thread::sleep(d.mul_f64(self.time_scale));
        }
    }
}
