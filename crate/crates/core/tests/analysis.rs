use std::path::PathBuf;

use baitshell_core::analysis::*;
use baitshell_core::log::{ParseMode, SessionSummary};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/heliza_table2.ndjson")
}

fn session(instance: &str, duration: f64, commands: u64) -> SessionSummary {
    SessionSummary {
        session_id: format!("{instance}-{duration}-{commands}"),
        instance: instance.to_string(),
        src_ip: "192.0.2.1".to_string(),
        duration_seconds: duration,
        command_count: commands,
        login_success: true,
        close_reason: Some("client-exit".to_string()),
    }
}

#[test]
fn heliza_fixture_reproduces_table_two() {
    let a = analyze_logs(&[fixture()], ParseMode::Strict, true).unwrap();
    assert!(a.warnings.is_empty() && a.anomalies.is_empty());
    let bins = &a.report.interactions[0];
    assert_eq!(bins.instance, "heliza");
    assert_eq!(bins.n, 67);
    assert_eq!(bins.totals, [15, 15, 10, 5, 6, 5, 9, 2]);
    assert_eq!(bins.percentages, [22.39, 22.39, 14.93, 7.46, 8.96, 7.46, 13.43, 2.99]);
    assert_eq!(a.report.durations[0].n, 67);
}

#[test]
fn csv_round_trip() {
    let sessions: Vec<_> = (0..40u64).map(|i| session(["gamepot", "heliza"][i as usize % 2], i as f64 * 7.123 + 0.1, i * i)).collect();
    let mut report = build_report(&sessions, true);
    report.durations.push(duration_summary(&[], "empty"));
    assert_eq!(parse_durations_csv(&durations_csv(&report.durations)).unwrap(), report.durations);
    assert_eq!(parse_interactions_csv(&interactions_csv(&report.interactions)).unwrap(), report.interactions);
}

#[test]
fn empty_input_prints_headers_only() {
    let report = build_report(&[], true);
    assert_eq!(durations_csv(&report.durations), "instance,n,min,q1,median,mean,q3,max\n");
    assert_eq!(interactions_csv(&report.interactions), "instance,n,bin,total,percent\n");
    let text = render(&report, ReportFormat::Text);
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 4);
}

#[test]
fn one_instance_one_row() {
    let report = build_report(&[session("gamepot", 5.314, 0), session("gamepot", 118.787, 3)], true);
    let durations = duration_table(&report.durations);
    let lines: Vec<&str> = durations.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["Instance", "N", "Min.", "1st", "Qu.", "Median", "Mean", "3rd", "Qu.", "Max"]);
    assert!(lines[2].starts_with("gamepot") && lines[2].contains("5.314") && lines[2].contains("118.787"));
    assert_eq!(interaction_table(&report.interactions).lines().count(), 4);
    assert_eq!(durations_csv(&report.durations).lines().count(), 2);
}

#[test]
fn text_columns_align() {
    let report = build_report(&[session("gamepot", 5.314, 0), session("control-long-name", 933.53, 701)], true);
    for table in [duration_table(&report.durations), interaction_table(&report.interactions)] {
        let widths: Vec<usize> = table.lines().skip(1).map(|l| l.len()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{table}");
    }
    assert_eq!(report.interactions[1].overflow, 1);
}

#[test]
fn pooled_and_failed_logins() {
    let mut failed = session("heliza", 3.0, 0);
    failed.login_success = false;
    let report = build_report(&[session("gamepot", 1.0, 1), session("heliza", 2.0, 2), failed], false);
    assert_eq!(report.durations.len(), 1);
    assert_eq!(report.durations[0].instance, POOLED_LABEL);
    assert_eq!(report.durations[0].n, 2);
}

#[test]
fn unknown_format_is_an_error() {
    assert!(matches!("xml".parse::<ReportFormat>(), Err(AnalysisError::UnknownFormat(_))));
    assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
}

#[test]
fn json_round_trip() {
    let report = build_report(&[session("gamepot", 5.314, 0), session("heliza", 10.07, 40)], true);
    let back: Report = serde_json::from_str(&render(&report, ReportFormat::Json)).unwrap();
    assert_eq!(back, report);
}

#[test]
fn missing_log_is_reported() {
    let err = analyze_logs(&[PathBuf::from("/nonexistent/x.ndjson")], ParseMode::Lenient, true).unwrap_err();
    assert!(matches!(err, AnalysisError::MissingLog(_)));
}
