use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{DurationStats, DurationSummary, InteractionBins, BIN_LABELS, OVERFLOW_LABEL};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(AnalysisError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub durations: Vec<DurationSummary>,
    pub interactions: Vec<InteractionBins>,
}

pub const DURATION_TITLE: &str = "Attack duration in seconds";
pub const INTERACTION_TITLE: &str = "Interaction in number of commands";
pub const DURATION_HEADER: [&str; 8] = ["Instance", "N", "Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max"];
pub const DURATION_CSV_HEADER: [&str; 8] = ["instance", "n", "min", "q1", "median", "mean", "q3", "max"];
pub const INTERACTION_CSV_HEADER: [&str; 5] = ["instance", "n", "bin", "total", "percent"];

fn pad_table(rows: &[Vec<String>], left_cols: usize) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; width];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| if i < left_cols { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn stat_cells(stats: Option<&DurationStats>) -> Vec<String> {
    match stats {
        Some(s) => [s.min, s.q1, s.median, s.mean, s.q3, s.max].iter().map(|v| format!("{v:.3}")).collect(),
        None => vec!["-".to_string(); 6],
    }
}

pub fn duration_table(rows: &[DurationSummary]) -> String {
    let mut table = vec![DURATION_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in rows {
        let mut row = vec![r.instance.clone(), r.n.to_string()];
        row.extend(stat_cells(r.stats.as_ref()));
        table.push(row);
    }
    format!("{DURATION_TITLE}\n{}", pad_table(&table, 1))
}

pub fn interaction_table(rows: &[InteractionBins]) -> String {
    let mut header = vec!["Instance".to_string(), String::new()];
    header.extend(BIN_LABELS.iter().map(|s| s.to_string()));
    header.push(OVERFLOW_LABEL.to_string());
    let mut table = vec![header];
    for r in rows {
        let mut totals = vec![r.instance.clone(), "total".to_string()];
        totals.extend(r.totals.iter().chain([&r.overflow]).map(u64::to_string));
        let mut pct = vec![String::new(), "%".to_string()];
        pct.extend(r.percentages.iter().chain([&r.overflow_percentage]).map(|p| format!("{p:.2}")));
        table.push(totals);
        table.push(pct);
    }
    format!("{INTERACTION_TITLE}\n{}", pad_table(&table, 2))
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing csv to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// Columns: `instance,n,min,q1,median,mean,q3,max`. Statistics are written
/// at full precision and left empty for instances without sessions.
pub fn durations_csv(rows: &[DurationSummary]) -> String {
    csv_string(|w| {
        w.write_record(DURATION_CSV_HEADER)?;
        for r in rows {
            let mut rec = vec![r.instance.clone(), r.n.to_string()];
            match &r.stats {
                Some(s) => rec.extend([s.min, s.q1, s.median, s.mean, s.q3, s.max].iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// Columns: `instance,n,bin,total,percent`, one row per bin including the
/// overflow bin `>700`.
pub fn interactions_csv(rows: &[InteractionBins]) -> String {
    csv_string(|w| {
        w.write_record(INTERACTION_CSV_HEADER)?;
        for r in rows {
            let labels = BIN_LABELS.iter().copied().chain([OVERFLOW_LABEL]);
            let totals = r.totals.iter().chain([&r.overflow]);
            let pcts = r.percentages.iter().chain([&r.overflow_percentage]);
            for ((label, total), pct) in labels.zip(totals).zip(pcts) {
                w.write_record([r.instance.as_str(), &r.n.to_string(), label, &total.to_string(), &pct.to_string()])?;
            }
        }
        Ok(())
    })
}

fn bad(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::Csv(msg.into())
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T, AnalysisError> {
    s.parse().map_err(|_| bad(format!("bad {what} {s:?}")))
}

fn records(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, AnalysisError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(bad(format!("unexpected header {got:?}")));
    }
    r.records().collect::<Result<_, _>>().map_err(|e| bad(e.to_string()))
}

pub fn parse_durations_csv(text: &str) -> Result<Vec<DurationSummary>, AnalysisError> {
    records(text, &DURATION_CSV_HEADER)?
        .iter()
        .map(|rec| {
            let stats = if rec[2].is_empty() {
                None
            } else {
                let v: Vec<f64> = (2..8).map(|i| num(&rec[i], DURATION_CSV_HEADER[i])).collect::<Result<_, _>>()?;
                Some(DurationStats { min: v[0], q1: v[1], median: v[2], mean: v[3], q3: v[4], max: v[5] })
            };
            Ok(DurationSummary { instance: rec[0].to_string(), n: num(&rec[1], "n")?, stats })
        })
        .collect()
}

pub fn parse_interactions_csv(text: &str) -> Result<Vec<InteractionBins>, AnalysisError> {
    let recs = records(text, &INTERACTION_CSV_HEADER)?;
    let mut out = Vec::new();
    for chunk in recs.chunks(BIN_LABELS.len() + 1) {
        if chunk.len() != BIN_LABELS.len() + 1 {
            return Err(bad("incomplete bin group"));
        }
        let instance = chunk[0][0].to_string();
        let mut totals = [0u64; 8];
        let mut percentages = [0f64; 8];
        for (i, rec) in chunk.iter().enumerate() {
            let expected = BIN_LABELS.get(i).copied().unwrap_or(OVERFLOW_LABEL);
            if rec[0] != instance || &rec[2] != expected {
                return Err(bad(format!("expected bin {expected} of {instance}")));
            }
            if i < 8 {
                totals[i] = num(&rec[3], "total")?;
                percentages[i] = num(&rec[4], "percent")?;
            }
        }
        let last = &chunk[8];
        out.push(InteractionBins {
            instance,
            n: num(&chunk[0][1], "n")?,
            totals,
            overflow: num(&last[3], "total")?,
            percentages,
            overflow_percentage: num(&last[4], "percent")?,
        });
    }
    Ok(out)
}

pub fn render(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => {
            let mut s = duration_table(&report.durations);
            let _ = write!(s, "\n{}", interaction_table(&report.interactions));
            s
        }
        ReportFormat::Csv => format!("{}\n{}", durations_csv(&report.durations), interactions_csv(&report.interactions)),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}
