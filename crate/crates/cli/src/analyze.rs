use std::path::PathBuf;

use anyhow::Context;
use baitshell_core::analysis::{analyze_logs, render, ReportFormat};
use baitshell_core::log::ParseMode;

#[derive(clap::Args)]
pub struct Args {
    /// Log files; rotated siblings (`.1`, `.2`, ...) are read too.
    #[arg(long, num_args = 1.., required = true)]
    log: Vec<PathBuf>,
    /// `text`, `csv` or `json`.
    #[arg(long, default_value = "text")]
    format: String,
    /// One row per instance label instead of a pooled row.
    #[arg(long)]
    by_instance: bool,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let mode = if a.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let analysis = analyze_logs(&a.log, mode, a.by_instance)?;
    for (path, w) in &analysis.warnings {
        eprintln!("warning: {}:{}: {}", path.display(), w.line, w.message);
    }
    for anomaly in &analysis.anomalies {
        eprintln!("warning: {anomaly:?}");
    }
    let text = render(&analysis.report, format);
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
