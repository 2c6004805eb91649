//! Per-repository persistence in the fixture line format.
//!
//! A store file holds one `meta` line, an optional `project` line, then
//! events, issues and recommendations. Saving rewrites the file compacted in
//! canonical order through a temp file and rename, so readers only ever see a
//! fully written snapshot. When loading, a later line for an existing key
//! replaces the earlier one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::ingest::{read_records, write_records, IngestError, MetaLine, Record};
use crate::model::{BotPolicy, ContributionEvent, IssueRecord, ProjectProfile, RepoRef};
use crate::recommend::RecommendationSet;

pub const DEFAULT_STORE_DIR: &str = ".community-pulse";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: DateTime<Utc>, to: DateTime<Utc> },
    #[error("store {path} belongs to {found}, not {expected}")]
    RepoMismatch {
        path: PathBuf,
        expected: RepoRef,
        found: RepoRef,
    },
    #[error("store {0} has no meta record")]
    MissingMeta(PathBuf),
    #[error("store {path}, record {index}: {reason}")]
    BadRecord {
        path: PathBuf,
        index: usize,
        reason: String,
    },
}

/// In-memory state of one repository's store.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreSnapshot {
    pub repo: RepoRef,
    /// Latest ingestion watermark.
    pub as_of: Option<DateTime<Utc>>,
    pub project: Option<ProjectProfile>,
    events: BTreeMap<String, ContributionEvent>,
    issues: BTreeMap<String, IssueRecord>,
    pub recommendations: RecommendationSet,
}

impl StoreSnapshot {
    pub fn new(repo: RepoRef) -> Self {
        Self {
            repo,
            as_of: None,
            project: None,
            events: BTreeMap::new(),
            issues: BTreeMap::new(),
            recommendations: RecommendationSet::default(),
        }
    }

    /// Inserts or overwrites by event id; returns how many ids were new.
    pub fn upsert_events<I>(&mut self, events: I) -> usize
    where
        I: IntoIterator<Item = ContributionEvent>,
    {
        events
            .into_iter()
            .filter(|e| self.events.insert(e.event_id.clone(), e.clone()).is_none())
            .count()
    }

    pub fn upsert_issues<I>(&mut self, issues: I) -> usize
    where
        I: IntoIterator<Item = IssueRecord>,
    {
        issues
            .into_iter()
            .filter(|i| self.issues.insert(i.issue_id.clone(), i.clone()).is_none())
            .count()
    }

    /// Moves the watermark forward; it never moves back.
    pub fn advance_watermark(&mut self, as_of: DateTime<Utc>) {
        self.as_of = Some(self.as_of.map_or(as_of, |current| current.max(as_of)));
    }

    /// Events with `from <= timestamp <= to`, sorted by `(timestamp, event_id)`.
    pub fn query_window(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<ContributionEvent>, StoreError> {
        if from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        let mut out: Vec<_> = self
            .events
            .values()
            .filter(|e| from <= e.timestamp && e.timestamp <= to)
            .cloned()
            .collect();
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(out)
    }

    /// Every event, sorted by `(timestamp, event_id)`.
    pub fn events(&self) -> Vec<ContributionEvent> {
        let mut out: Vec<_> = self.events.values().cloned().collect();
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn latest_event(&self) -> Option<DateTime<Utc>> {
        self.events.values().map(|e| e.timestamp).max()
    }

    /// Issues sorted by id.
    pub fn issues(&self) -> Vec<IssueRecord> {
        self.issues.values().cloned().collect()
    }

    pub fn to_records(&self) -> Vec<Record> {
        let mut records = vec![Record::Meta(MetaLine {
            repo: self.repo.clone(),
            as_of: self.as_of,
        })];
        records.extend(self.project.clone().map(Record::Project));
        records.extend(self.events().iter().map(|e| Record::Event(e.into())));
        records.extend(self.issues.values().map(|i| Record::Issue(i.into())));
        records.extend(self.recommendations.iter().cloned().map(Record::Recommendation));
        records
    }

    pub fn from_records(path: &Path, records: Vec<Record>, bots: &BotPolicy) -> Result<Self, StoreError> {
        let mut snapshot: Option<Self> = None;
        for (index, record) in records.into_iter().enumerate() {
            let bad = |reason: String| StoreError::BadRecord {
                path: path.to_path_buf(),
                index: index + 1,
                reason,
            };
            if let Record::Meta(meta) = record {
                match &mut snapshot {
                    None => {
                        let mut fresh = Self::new(meta.repo);
                        fresh.as_of = meta.as_of;
                        snapshot = Some(fresh);
                    }
                    Some(existing) => {
                        if existing.repo != meta.repo {
                            return Err(bad(format!("second meta record for {}", meta.repo)));
                        }
                        if let Some(as_of) = meta.as_of {
                            existing.advance_watermark(as_of);
                        }
                    }
                }
                continue;
            }
            let snap = snapshot.as_mut().ok_or_else(|| StoreError::MissingMeta(path.to_path_buf()))?;
            match record {
                Record::Meta(_) => unreachable!("handled above"),
                Record::Project(project) => snap.project = Some(project),
                Record::Event(line) => {
                    snap.upsert_events([line.into_event(bots).map_err(bad)?]);
                }
                Record::Issue(line) => {
                    snap.upsert_issues([line.into_issue().map_err(bad)?]);
                }
                Record::Recommendation(rec) => snap.recommendations.insert(rec),
            }
        }
        snapshot.ok_or_else(|| StoreError::MissingMeta(path.to_path_buf()))
    }
}

/// A snapshot bound to its file.
#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
    pub snapshot: StoreSnapshot,
}

impl Store {
    /// `./.community-pulse/owner__name.ndjson`
    pub fn default_path(repo: &RepoRef) -> PathBuf {
        Path::new(DEFAULT_STORE_DIR).join(format!("{}.ndjson", repo.file_stem()))
    }

    /// Loads an existing store file.
    pub fn load(path: &Path, bots: &BotPolicy) -> Result<Self, StoreError> {
        let records = read_records(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            snapshot: StoreSnapshot::from_records(path, records, bots)?,
        })
    }

    /// Loads the store at `path`, or starts an empty one for `repo` if the file does not exist.
    pub fn open(path: &Path, repo: &RepoRef, bots: &BotPolicy) -> Result<Self, StoreError> {
        if !path.exists() {
            return Ok(Self {
                path: path.to_path_buf(),
                snapshot: StoreSnapshot::new(repo.clone()),
            });
        }
        let store = Self::load(path, bots)?;
        if &store.snapshot.repo != repo {
            return Err(StoreError::RepoMismatch {
                path: path.to_path_buf(),
                expected: repo.clone(),
                found: store.snapshot.repo,
            });
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn save(&self) -> Result<(), StoreError> {
        save_snapshot(&self.path, &self.snapshot)
    }
}

/// Writes a compacted snapshot atomically.
pub fn save_snapshot(path: &Path, snapshot: &StoreSnapshot) -> Result<(), StoreError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IngestError::io(parent, e))?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    write_records(&tmp, &snapshot.to_records())?;
    std::fs::rename(&tmp, path).map_err(|e| IngestError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventKind, IssueState};

    fn ev(id: &str, ts: &str) -> ContributionEvent {
        ContributionEvent {
            event_id: id.into(),
            actor: BotPolicy::default().actor("alice").unwrap(),
            kind: EventKind::Commit,
            timestamp: ts.parse().unwrap(),
            repo: "o/n".parse().unwrap(),
        }
    }

    fn five() -> Vec<ContributionEvent> {
        (1..=5).map(|d| ev(&format!("e{d}"), &format!("2021-01-0{d}T00:00:00Z"))).collect()
    }

    fn snapshot() -> StoreSnapshot {
        StoreSnapshot::new("o/n".parse().unwrap())
    }

    #[test]
    fn upsert_counts_new_records() {
        let mut snap = snapshot();
        assert_eq!(snap.upsert_events(five()), 5);
        assert_eq!(snap.upsert_events(five()), 0);
        let mut mixed = five()[..2].to_vec();
        mixed.extend((6..=8).map(|d| ev(&format!("e{d}"), &format!("2021-01-0{d}T00:00:00Z"))));
        assert_eq!(snap.upsert_events(mixed), 3);
        assert_eq!(snap.event_count(), 8);
    }

    #[test]
    fn query_window_bounds() {
        let mut snap = snapshot();
        snap.upsert_events(five());
        let all = snap
            .query_window("2020-01-01T00:00:00Z".parse().unwrap(), "2022-01-01T00:00:00Z".parse().unwrap())
            .unwrap();
        assert_eq!(all.len(), 5);
        let gap = snap
            .query_window("2021-01-02T00:00:01Z".parse().unwrap(), "2021-01-02T23:59:59Z".parse().unwrap())
            .unwrap();
        assert!(gap.is_empty());
        let edge = snap
            .query_window("2021-01-02T00:00:00Z".parse().unwrap(), "2021-01-04T00:00:00Z".parse().unwrap())
            .unwrap();
        assert_eq!(edge.iter().map(|e| e.event_id.as_str()).collect::<Vec<_>>(), ["e2", "e3", "e4"]);
        assert!(matches!(
            snap.query_window("2021-02-01T00:00:00Z".parse().unwrap(), "2021-01-01T00:00:00Z".parse().unwrap()),
            Err(StoreError::InvalidRange { .. })
        ));
    }

    #[test]
    fn save_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/o__n.ndjson");
        let repo: RepoRef = "o/n".parse().unwrap();
        let mut store = Store::open(&path, &repo, &BotPolicy::default()).unwrap();
        store.snapshot.upsert_events(five());
        store.snapshot.upsert_issues([IssueRecord::new(
            "1",
            IssueState::Open,
            ["Good First Issue"],
            "2021-01-01T00:00:00Z".parse().unwrap(),
        )]);
        store.snapshot.advance_watermark("2021-06-30T00:00:00Z".parse().unwrap());
        store.snapshot.advance_watermark("2021-05-30T00:00:00Z".parse().unwrap());
        store.save().unwrap();
        let reloaded = Store::load(&path, &BotPolicy::default()).unwrap();
        assert_eq!(reloaded.snapshot, store.snapshot);
        assert_eq!(reloaded.snapshot.as_of.unwrap().to_rfc3339(), "2021-06-30T00:00:00+00:00");
        let first = std::fs::read_to_string(&path).unwrap();
        reloaded.save().unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
        assert!(first.starts_with(r#"{"type":"meta","repo":"o/n""#));

        let other: RepoRef = "x/y".parse().unwrap();
        assert!(matches!(
            Store::open(&path, &other, &BotPolicy::default()),
            Err(StoreError::RepoMismatch { .. })
        ));
    }

    #[test]
    fn store_without_meta_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ndjson");
        std::fs::write(
            &path,
            r#"{"type":"event","event_id":"c1","actor":"a","kind":"commit","timestamp":"2021-01-05T10:00:00Z","repo":"o/n"}"#,
        )
        .unwrap();
        assert!(matches!(Store::load(&path, &BotPolicy::default()), Err(StoreError::MissingMeta(_))));
    }

    #[test]
    fn default_path_layout() {
        let repo: RepoRef = "octo/pulse".parse().unwrap();
        assert_eq!(Store::default_path(&repo), Path::new(".community-pulse/octo__pulse.ndjson"));
    }
}
