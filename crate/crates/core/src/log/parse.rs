use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::SessionEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Skip malformed lines and report them as warnings.
    #[default]
    Lenient,
    /// Abort on the first malformed line.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutput {
    pub events: Vec<SessionEvent>,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Reads one event per line. Blank lines are ignored.
pub fn parse_log<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParseOutput, LogError> {
    let mut out = ParseOutput::default();
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = line.map_err(|e| LogError::Io { path: PathBuf::from("<stream>"), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        match SessionEvent::from_line(&line) {
            Ok(event) => out.events.push(event),
            Err(e) => {
                let message = e.to_string();
                if mode == ParseMode::Strict {
                    return Err(LogError::Malformed { line: number, message });
                }
                log::warn!("skipping malformed log line {number}: {message}");
                out.warnings.push(ParseWarning { line: number, message });
            }
        }
    }
    Ok(out)
}

pub fn parse_log_file(path: &Path, mode: ParseMode) -> Result<ParseOutput, LogError> {
    let file = std::fs::File::open(path).map_err(|source| LogError::Io { path: path.to_path_buf(), source })?;
    parse_log(std::io::BufReader::new(file), mode).map_err(|e| match e {
        LogError::Io { source, .. } => LogError::Io { path: path.to_path_buf(), source },
        other => other,
    })
}
