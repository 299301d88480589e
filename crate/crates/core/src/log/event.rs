use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const LOG_SCHEMA_VERSION: u32 = 1;

pub const CONNECT: &str = "hp.session.connect";
pub const LOGIN_SUCCESS: &str = "hp.login.success";
pub const LOGIN_FAILED: &str = "hp.login.failed";
pub const COMMAND_INPUT: &str = "hp.command.input";
pub const POLICY_ACTION: &str = "hp.policy.action";
pub const DOWNLOAD: &str = "hp.download";
pub const CLOSED: &str = "hp.session.closed";

/// One log line. Optional payload fields are omitted from the JSON when
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub schema: u32,
    pub eventid: String,
    pub session: String,
    pub src_ip: String,
    #[serde(with = "timestamp")]
    pub timestamp: DateTime<Utc>,
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outfile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl SessionEvent {
    /// Event with the envelope filled in and no payload.
    pub fn new(eventid: &str, session: &str, src_ip: &str, timestamp: DateTime<Utc>, instance: &str) -> Self {
        Self {
            schema: LOG_SCHEMA_VERSION,
            eventid: eventid.to_string(),
            session: session.to_string(),
            src_ip: src_ip.to_string(),
            timestamp: crate::clock::truncate_ms(timestamp),
            instance: instance.to_string(),
            username: None,
            password: None,
            input: None,
            action: None,
            message: None,
            sequence: None,
            url: None,
            sha256: None,
            outfile: None,
            duration: None,
            reason: None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    /// A command input that counts towards interaction quantity.
    pub fn is_counted_command(&self) -> bool {
        self.eventid == COMMAND_INPUT && self.input.as_deref().is_some_and(|i| !i.trim().is_empty())
    }
}

/// `2024-01-01T00:00:05.314Z`.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

pub mod timestamp {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn line_shape() {
        let t = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 5).unwrap() + chrono::TimeDelta::milliseconds(314);
        let mut e = SessionEvent::new(COMMAND_INPUT, "ab", "10.0.0.1", t, "gamepot");
        e.input = Some("echo \"a\nb\"".into());
        let line = e.to_line();
        assert_eq!(
            line,
            r#"{"schema":1,"eventid":"hp.command.input","session":"ab","src_ip":"10.0.0.1","timestamp":"2024-01-01T00:00:05.314Z","instance":"gamepot","input":"echo \"a\nb\""}"#
        );
        assert!(!line.contains('\n'));
        assert_eq!(SessionEvent::from_line(&line).unwrap(), e);
    }

    #[test]
    fn empty_input_is_a_keystroke() {
        let mut e = SessionEvent::new(COMMAND_INPUT, "s", "ip", Utc::now(), "x");
        e.input = Some(String::new());
        assert!(!e.is_counted_command());
        e.input = Some("ls".into());
        assert!(e.is_counted_command());
    }
}
