use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{SessionEvent, CLOSED, CONNECT, LOGIN_SUCCESS};
use crate::clock::seconds_between;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub instance: String,
    pub src_ip: String,
    pub duration_seconds: f64,
    pub command_count: u64,
    pub login_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub close_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyKind {
    MissingConnect,
    MissingClose,
    TimestampsOutOfOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub session_id: String,
    pub kind: AnomalyKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregation {
    pub summaries: Vec<SessionSummary>,
    pub anomalies: Vec<Anomaly>,
}

/// Groups events by session id. Duration runs from login (or connect when no
/// login happened) to the close event; the command count is the number of
/// non-blank command inputs. Sessions lacking a connect or close event are
/// still summarised from what is there and flagged. Output is sorted by
/// session id.
pub fn sessions_from_events(events: &[SessionEvent]) -> Aggregation {
    let mut groups: BTreeMap<&str, Vec<&SessionEvent>> = BTreeMap::new();
    for e in events {
        groups.entry(e.session.as_str()).or_default().push(e);
    }

    let mut agg = Aggregation::default();
    for (id, mut group) in groups {
        let flag = |agg: &mut Aggregation, kind| agg.anomalies.push(Anomaly { session_id: id.to_string(), kind });
        if group.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            flag(&mut agg, AnomalyKind::TimestampsOutOfOrder);
        }
        group.sort_by_key(|e| e.timestamp);

        let first_of = |eventid: &str| group.iter().find(|e| e.eventid == eventid).copied();
        let connect = first_of(CONNECT);
        let login = first_of(LOGIN_SUCCESS);
        let close = first_of(CLOSED);
        if connect.is_none() {
            flag(&mut agg, AnomalyKind::MissingConnect);
        }
        if close.is_none() {
            flag(&mut agg, AnomalyKind::MissingClose);
        }

        let envelope = connect.unwrap_or(group[0]);
        let start: DateTime<Utc> = login.or(connect).unwrap_or(group[0]).timestamp;
        let end = close.map_or(group[group.len() - 1].timestamp, |c| c.timestamp);
        agg.summaries.push(SessionSummary {
            session_id: id.to_string(),
            instance: envelope.instance.clone(),
            src_ip: envelope.src_ip.clone(),
            duration_seconds: seconds_between(start, end).max(0.0),
            command_count: group.iter().filter(|e| e.is_counted_command()).count() as u64,
            login_success: login.is_some(),
            close_reason: close.and_then(|c| c.reason.clone()),
        });
    }
    agg
}
