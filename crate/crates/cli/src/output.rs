//! Report rendering: canonical JSON lives in the core crate; text and CSV here.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use community_pulse_core::analytics::MonthlyCohortStats;
use community_pulse_core::pipeline::{AnalysisReport, IngestReport};
use community_pulse_core::signals::GoalSource;
use community_pulse_core::CalendarMonth;
use serde::{Deserialize, Serialize};

pub const TRENDS_HEADER: [&str; 4] = ["month", "joined", "active", "retained"];

#[derive(Debug, Serialize, Deserialize)]
struct TrendRow {
    month: String,
    joined: u32,
    active: u32,
    retained: u32,
}

/// Trends as CSV with a `month,joined,active,retained` header.
pub fn trends_csv(trends: &[MonthlyCohortStats]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(TRENDS_HEADER).expect("in-memory write");
    for t in trends {
        writer
            .serialize(TrendRow {
                month: t.month.to_string(),
                joined: t.joined,
                active: t.active,
                retained: t.retained,
            })
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Reads back what [`trends_csv`] wrote.
pub fn parse_trends_csv(text: &str) -> Result<Vec<MonthlyCohortStats>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == TRENDS_HEADER, "unexpected trends header {header:?}");
    reader
        .deserialize::<TrendRow>()
        .map(|row| {
            let row = row?;
            Ok(MonthlyCohortStats {
                month: row.month.parse::<CalendarMonth>()?,
                joined: row.joined,
                active: row.active,
                retained: row.retained,
            })
        })
        .collect()
}

/// Writes the file through a temp file so an interrupted export leaves no partial CSV.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))
}

fn source_name(source: GoalSource) -> &'static str {
    match source {
        GoalSource::Readme => "readme",
        GoalSource::Description => "description",
        GoalSource::Topics => "topics",
    }
}

/// Human-readable report. Every number is printed exactly as the JSON report holds it.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let w = &report.window;
    let _ = writeln!(out, "repo: {}", report.repo);
    let _ = writeln!(out, "window: {}..{} ({} months)", w.first, w.last, w.months);
    let _ = writeln!(out, "as of: {}", w.as_of.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true));
    let _ = writeln!(out, "rising threshold: {}", w.threshold);
    let _ = writeln!(out, "newcomers: {}", report.newcomers);
    if report.insufficient_history {
        let _ = writeln!(out, "warning: no contributions before the window; everyone counts as a newcomer");
    }

    let _ = writeln!(out, "\ntrends:");
    let _ = writeln!(out, "  {:<8} {:>6} {:>6} {:>8}", "month", "joined", "active", "retained");
    for t in &report.trends {
        let _ = writeln!(out, "  {:<8} {:>6} {:>6} {:>8}", t.month.to_string(), t.joined, t.active, t.retained);
    }

    let _ = writeln!(out, "\nrising contributors: {}", report.rising.len());
    for r in &report.rising {
        let months: Vec<String> = r.active_months.iter().map(ToString::to_string).collect();
        let member = if r.is_team_member { " [member]" } else { "" };
        let _ = writeln!(
            out,
            "  {}{member}: {} active months ({}); commits {}, issues {}, prs {}",
            r.login,
            months.len(),
            months.join(", "),
            r.totals.commits,
            r.totals.issues,
            r.totals.prs
        );
    }

    let l = &report.labels;
    let _ = writeln!(out, "\nlabels:");
    let _ = writeln!(out, "  total issues: {}", l.total_issues);
    let _ = writeln!(out, "  open issues: {}", l.open_issues);
    let _ = writeln!(out, "  newcomer-labeled open issues: {}", l.newcomer_labeled_open);
    let _ = writeln!(out, "  coverage percent: {}", l.coverage_percent);
    let matched: Vec<&str> = l.matched_labels.iter().map(String::as_str).collect();
    let _ = writeln!(out, "  matched labels: {}", if matched.is_empty() { "none".into() } else { matched.join(", ") });

    let _ = writeln!(out, "\ngoals ({}): {}", report.goals.method, report.goals.tags.len());
    for tag in &report.goals.tags {
        let evidence: Vec<String> = tag
            .evidence
            .iter()
            .map(|e| format!("{} \"{}\"", source_name(e.source), e.matched_term))
            .collect();
        let _ = writeln!(out, "  {}: {}", tag.category, evidence.join(", "));
    }

    let _ = writeln!(out, "\npending recommendations: {}", report.recommendations.len());
    for rec in &report.recommendations {
        let _ = writeln!(out, "  {} {} {}", rec.id, rec.kind.as_str(), rec.target);
    }
    out
}

pub fn render_ingest_text(report: &IngestReport) -> String {
    format!(
        "events new: {}\nnewcomers: {}\nrising: {}\nrecommendations pending: {}\n",
        report.events_new, report.newcomers, report.rising, report.recommendations_pending
    )
}
