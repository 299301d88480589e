//! Newline-delimited JSON session events: schema, writer, parser and
//! per-session aggregation. The line format is described in `docs/log-schema`.

mod event;
mod parse;
mod sessions;
mod writer;

pub use event::{
    format_timestamp, SessionEvent, CLOSED, COMMAND_INPUT, CONNECT, DOWNLOAD, LOGIN_FAILED, LOGIN_SUCCESS,
    LOG_SCHEMA_VERSION, POLICY_ACTION,
};
pub use parse::{parse_log, parse_log_file, LogError, ParseMode, ParseOutput, ParseWarning};
pub use sessions::{sessions_from_events, Aggregation, Anomaly, AnomalyKind, SessionSummary};
pub use writer::{rotated_path, rotation_set, EventSink, LogWriter, MemorySink, Rotation, SharedSink};
