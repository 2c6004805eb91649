//! Acquisition of contribution events and issues, from offline fixtures or a
//! GitHub-compatible REST API.

mod fixture;
mod github;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Months, Utc};
use thiserror::Error;

pub use fixture::{
    export_fixture, load_fixture, parse_records, read_records, write_records, EventLine, Fixture, IssueLine,
    MetaLine, Record,
};
pub use github::{parse_next_link, FetchOutcome, GithubClient, RetryPolicy, API_URL_ENV, TOKEN_ENV};

use crate::model::{BotPolicy, ContributionEvent, IssueRecord, RepoRef};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited{}", .retry_after.map(|d| format!(", retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// How far back before `as_of` to mine history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryHorizon {
    Months(u32),
    Full,
}

/// Default extra history beyond the analysis window, used for newcomer detection.
pub const DEFAULT_EXTRA_HISTORY_MONTHS: u32 = 24;

impl HistoryHorizon {
    /// Window length plus the default extra history.
    pub fn for_window(window_months: u32) -> Self {
        Self::Months(window_months + DEFAULT_EXTRA_HISTORY_MONTHS)
    }

    /// Earliest instant inside the horizon, `None` for full history.
    pub fn since(self, as_of: DateTime<Utc>) -> Option<DateTime<Utc>> {
        match self {
            Self::Full => None,
            Self::Months(n) => Some(as_of.checked_sub_months(Months::new(n)).unwrap_or(DateTime::<Utc>::MIN_UTC)),
        }
    }
}

/// Restricts to `[since, as_of]`, deduplicates by event id (last occurrence wins)
/// and sorts by `(timestamp, event_id)`.
pub fn finalize_events<I>(events: I, since: Option<DateTime<Utc>>, as_of: DateTime<Utc>) -> Vec<ContributionEvent>
where
    I: IntoIterator<Item = ContributionEvent>,
{
    let mut by_id = BTreeMap::new();
    for event in events {
        if event.timestamp > as_of || since.is_some_and(|s| event.timestamp < s) {
            continue;
        }
        by_id.insert(event.event_id.clone(), event);
    }
    let mut out: Vec<_> = by_id.into_values().collect();
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out
}

/// Offline event source replaying a fixture file.
#[derive(Debug, Clone)]
pub struct FixtureSource {
    path: PathBuf,
    bots: BotPolicy,
}

impl FixtureSource {
    pub fn new(path: impl Into<PathBuf>, bots: BotPolicy) -> Self {
        Self {
            path: path.into(),
            bots,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<Fixture, IngestError> {
        load_fixture(&self.path, &self.bots)
    }

    pub fn fetch_events(
        &self,
        repo: &RepoRef,
        as_of: DateTime<Utc>,
        horizon: HistoryHorizon,
    ) -> Result<Vec<ContributionEvent>, IngestError> {
        let fixture = self.load()?;
        let events = fixture.events.into_iter().filter(|e| &e.repo == repo);
        Ok(finalize_events(events, horizon.since(as_of), as_of))
    }

    pub fn fetch_issues(&self) -> Result<Vec<IssueRecord>, IngestError> {
        let mut by_id = BTreeMap::new();
        for issue in self.load()?.issues {
            by_id.insert(issue.issue_id.clone(), issue);
        }
        Ok(by_id.into_values().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventKind;

    fn event(id: &str, ts: &str) -> ContributionEvent {
        ContributionEvent {
            event_id: id.into(),
            actor: BotPolicy::default().actor("a").unwrap(),
            kind: EventKind::Commit,
            timestamp: ts.parse().unwrap(),
            repo: "o/n".parse().unwrap(),
        }
    }

    #[test]
    fn finalize_bounds_are_inclusive() {
        let as_of: DateTime<Utc> = "2021-06-30T00:00:00Z".parse().unwrap();
        let since = HistoryHorizon::Months(6).since(as_of);
        assert_eq!(since.unwrap().to_rfc3339(), "2020-12-30T00:00:00+00:00");
        let out = finalize_events(
            vec![
                event("late", "2021-06-30T00:00:01Z"),
                event("edge-hi", "2021-06-30T00:00:00Z"),
                event("edge-lo", "2020-12-30T00:00:00Z"),
                event("early", "2020-12-29T23:59:59Z"),
                event("edge-hi", "2021-06-30T00:00:00Z"),
            ],
            since,
            as_of,
        );
        let ids: Vec<_> = out.iter().map(|e| e.event_id.as_str()).collect();
        assert_eq!(ids, vec!["edge-lo", "edge-hi"]);
    }

    #[test]
    fn full_horizon_keeps_history() {
        let as_of: DateTime<Utc> = "2021-06-30T00:00:00Z".parse().unwrap();
        assert_eq!(HistoryHorizon::Full.since(as_of), None);
        assert_eq!(HistoryHorizon::for_window(6), HistoryHorizon::Months(30));
        let out = finalize_events(vec![event("old", "2001-01-01T00:00:00Z")], None, as_of);
        assert_eq!(out.len(), 1);
    }
}
