use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::to_delta;

#[derive(Debug, thiserror::Error)]
pub enum CredentialError {
    #[error("cannot read credentials: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed credentials file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("duplicate user {0:?}")]
    Duplicate(String),
    #[error("user {0:?} has an empty password")]
    EmptyPassword(String),
    #[error("user name must not be empty")]
    EmptyUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub username: String,
    pub password: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<String>,
}

/// Accepted logins. File format:
///
/// ```toml
/// [[user]]
/// username = "jmiller"
/// password = "c0rrect-h0rse-battery"
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialStore {
    users: Vec<Credential>,
}

#[derive(Deserialize, Serialize)]
struct CredentialFile {
    #[serde(default)]
    user: Vec<Credential>,
}

impl CredentialStore {
    pub fn new(users: Vec<Credential>) -> Result<Self, CredentialError> {
        let mut seen = std::collections::HashSet::new();
        for c in &users {
            if c.username.is_empty() {
                return Err(CredentialError::EmptyUser);
            }
            if c.password.is_empty() {
                return Err(CredentialError::EmptyPassword(c.username.clone()));
            }
            if !seen.insert(c.username.as_str()) {
                return Err(CredentialError::Duplicate(c.username.clone()));
            }
        }
        Ok(Self { users })
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self, CredentialError> {
        Self::new(
            pairs
                .iter()
                .map(|(u, p)| Credential { username: u.to_string(), password: p.to_string(), home: None })
                .collect(),
        )
    }

    pub fn from_toml(text: &str) -> Result<Self, CredentialError> {
        let file: CredentialFile = toml::from_str(text)?;
        Self::new(file.user)
    }

    pub fn from_file(path: &Path) -> Result<Self, CredentialError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&CredentialFile { user: self.users.clone() }).expect("credentials serialize")
    }

    pub fn usernames(&self) -> impl Iterator<Item = &str> {
        self.users.iter().map(|c| c.username.as_str())
    }

    pub fn check(&self, username: &str, password: &str) -> bool {
        self.users.iter().any(|c| c.username == username && c.password == password)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanConfig {
    pub max_failures: usize,
    pub window: Duration,
    pub ban: Duration,
}

impl Default for BanConfig {
    fn default() -> Self {
        Self { max_failures: 5, window: Duration::from_secs(60), ban: Duration::from_secs(600) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateDecision {
    Allowed,
    Banned { until: DateTime<Utc> },
}

#[derive(Debug, Default)]
struct IpRecord {
    failures: VecDeque<DateTime<Utc>>,
    banned_until: Option<DateTime<Utc>>,
}

/// Sliding-window failure counts and active bans per source address. All
/// mutation goes through one lock.
#[derive(Debug, Default)]
pub struct BanState {
    config: BanConfig,
    records: Mutex<HashMap<String, IpRecord>>,
}

impl BanState {
    pub fn new(config: BanConfig) -> Self {
        Self { config, records: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> BanConfig {
        self.config
    }

    fn prune(&self, rec: &mut IpRecord, now: DateTime<Utc>) {
        let horizon = now - to_delta(self.config.window);
        while rec.failures.front().is_some_and(|t| *t <= horizon) {
            rec.failures.pop_front();
        }
        if rec.banned_until.is_some_and(|until| until <= now) {
            rec.banned_until = None;
        }
    }

    pub fn check(&self, ip: &str, now: DateTime<Utc>) -> RateDecision {
        let mut records = self.records.lock().unwrap();
        let Some(rec) = records.get_mut(ip) else {
            return RateDecision::Allowed;
        };
        self.prune(rec, now);
        match rec.banned_until {
            Some(until) => RateDecision::Banned { until },
            None => RateDecision::Allowed,
        }
    }

    /// Records a failed login; returns the resulting state.
    pub fn record_failure(&self, ip: &str, now: DateTime<Utc>) -> RateDecision {
        let mut records = self.records.lock().unwrap();
        let rec = records.entry(ip.to_string()).or_default();
        self.prune(rec, now);
        if let Some(until) = rec.banned_until {
            return RateDecision::Banned { until };
        }
        rec.failures.push_back(now);
        if rec.failures.len() >= self.config.max_failures {
            let until = now + to_delta(self.config.ban);
            rec.banned_until = Some(until);
            rec.failures.clear();
            log::info!("banning {ip} until {until}");
            return RateDecision::Banned { until };
        }
        RateDecision::Allowed
    }

    /// Failures currently inside the window.
    pub fn failures(&self, ip: &str, now: DateTime<Utc>) -> usize {
        let mut records = self.records.lock().unwrap();
        records.get_mut(ip).map_or(0, |rec| {
            self.prune(rec, now);
            rec.failures.len()
        })
    }
}

pub fn rate_limit_check(bans: &BanState, ip: &str, now: DateTime<Utc>) -> RateDecision {
    bans.check(ip, now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthOutcome {
    Accept,
    Reject,
    /// Refused before the credentials were looked at.
    Banned { until: DateTime<Utc> },
}

pub fn authenticate(
    store: &CredentialStore,
    bans: &BanState,
    username: &str,
    password: &str,
    ip: &str,
    now: DateTime<Utc>,
) -> AuthOutcome {
    if let RateDecision::Banned { until } = bans.check(ip, now) {
        return AuthOutcome::Banned { until };
    }
    if store.check(username, password) {
        AuthOutcome::Accept
    } else {
        bans.record_failure(ip, now);
        AuthOutcome::Reject
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeDelta, TimeZone};

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + TimeDelta::seconds(secs)
    }

    fn store() -> CredentialStore {
        CredentialStore::from_pairs(&[("jmiller", "Tr0ub4dor&3-x"), ("asmith", "7hdK!pq2-Lm")]).unwrap()
    }

    #[test]
    fn credential_checks() {
        let bans = BanState::default();
        assert_eq!(authenticate(&store(), &bans, "jmiller", "Tr0ub4dor&3-x", "a", t(0)), AuthOutcome::Accept);
        assert_eq!(authenticate(&store(), &bans, "jmiller", "nope", "a", t(0)), AuthOutcome::Reject);
        assert_eq!(bans.failures("a", t(1)), 1);
    }

    #[test]
    fn store_invariants() {
        assert!(matches!(CredentialStore::from_pairs(&[("a", "x"), ("a", "y")]), Err(CredentialError::Duplicate(_))));
        assert!(matches!(CredentialStore::from_pairs(&[("a", "")]), Err(CredentialError::EmptyPassword(_))));
        let s = store();
        assert_eq!(CredentialStore::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn four_failures_allowed_fifth_bans() {
        let bans = BanState::default();
        for i in 0..4 {
            assert_eq!(bans.record_failure("ip", t(i * 2)), RateDecision::Allowed);
        }
        assert_eq!(rate_limit_check(&bans, "ip", t(9)), RateDecision::Allowed);
        assert_eq!(bans.record_failure("ip", t(10)), RateDecision::Banned { until: t(610) });
        assert_eq!(rate_limit_check(&bans, "ip", t(609)), RateDecision::Banned { until: t(610) });
        assert_eq!(rate_limit_check(&bans, "ip", t(610)), RateDecision::Allowed);
    }

    #[test]
    fn banned_ip_refused_with_right_password() {
        let bans = BanState::default();
        for i in 0..5 {
            bans.record_failure("ip", t(i));
        }
        assert!(matches!(
            authenticate(&store(), &bans, "jmiller", "Tr0ub4dor&3-x", "ip", t(5)),
            AuthOutcome::Banned { .. }
        ));
    }

    #[test]
    fn spread_failures_never_ban() {
        let bans = BanState::default();
        for i in 0..5 {
            assert_eq!(bans.record_failure("ip", t(i * 1_440)), RateDecision::Allowed);
        }
        assert_eq!(rate_limit_check(&bans, "ip", t(7_200)), RateDecision::Allowed);
    }
}
