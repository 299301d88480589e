//! Descriptive statistics over session logs: attack-duration summaries and
//! interaction-count bins, rendered as text tables, CSV or JSON.

mod report;
mod stats;

use std::path::{Path, PathBuf};

pub use report::{
    duration_table, durations_csv, interaction_table, interactions_csv, parse_durations_csv, parse_interactions_csv,
    render, Report, ReportFormat, DURATION_CSV_HEADER, DURATION_HEADER, DURATION_TITLE, INTERACTION_CSV_HEADER,
    INTERACTION_TITLE,
};
pub use stats::{
    bin_index, duration_summary, interaction_bins, quantile, round_to, DurationStats, DurationSummary,
    InteractionBins, BIN_LABELS, BIN_UPPER, OVERFLOW_LABEL,
};

use crate::log::{
    parse_log_file, rotation_set, sessions_from_events, Anomaly, LogError, ParseMode, ParseWarning, SessionEvent,
    SessionSummary,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("unknown report format {0:?} (expected text, csv or json)")]
    UnknownFormat(String),
    #[error("malformed report csv: {0}")]
    Csv(String),
    #[error("no log file at {0}")]
    MissingLog(PathBuf),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Label used for all sessions when instances are pooled.
pub const POOLED_LABEL: &str = "all";

/// Builds both tables from per-session summaries. Only sessions with a
/// successful login count. Instances appear in order of first appearance.
pub fn build_report(sessions: &[SessionSummary], by_instance: bool) -> Report {
    let logged_in: Vec<SessionSummary> = sessions
        .iter()
        .filter(|s| s.login_success)
        .map(|s| {
            let mut s = s.clone();
            if !by_instance {
                s.instance = POOLED_LABEL.to_string();
            }
            s
        })
        .collect();
    let mut labels: Vec<String> = Vec::new();
    for s in &logged_in {
        if !labels.contains(&s.instance) {
            labels.push(s.instance.clone());
        }
    }
    Report {
        durations: labels.iter().map(|l| duration_summary(&logged_in, l)).collect(),
        interactions: labels.iter().map(|l| interaction_bins(&logged_in, l)).collect(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub report: Report,
    pub sessions: Vec<SessionSummary>,
    pub warnings: Vec<(PathBuf, ParseWarning)>,
    pub anomalies: Vec<Anomaly>,
}

/// Reads each log together with its rotated predecessors (`.1`, `.2`, ...)
/// and builds the report. Strict mode fails on the first malformed line.
pub fn analyze_logs(paths: &[impl AsRef<Path>], mode: ParseMode, by_instance: bool) -> Result<Analysis, AnalysisError> {
    let mut events: Vec<SessionEvent> = Vec::new();
    let mut warnings = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let files = rotation_set(p);
        if files.is_empty() {
            return Err(AnalysisError::MissingLog(p.to_path_buf()));
        }
        for f in files {
            let out = parse_log_file(&f, mode)?;
            events.extend(out.events);
            warnings.extend(out.warnings.into_iter().map(|w| (f.clone(), w)));
        }
    }
    let agg = sessions_from_events(&events);
    let mut sessions = agg.summaries;
    // keep first-appearance order of instances stable across inputs
    let first_seen = |label: &str| events.iter().position(|e| e.instance == label).unwrap_or(usize::MAX);
    sessions.sort_by_key(|s| first_seen(&s.instance));
    Ok(Analysis { report: build_report(&sessions, by_instance), sessions, warnings, anomalies: agg.anomalies })
}
