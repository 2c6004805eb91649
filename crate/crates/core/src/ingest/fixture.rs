//! Line-delimited JSON records: one object per line, discriminated by `"type"`.
//!
//! The same line format backs offline fixtures and the persistent store.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{BotPolicy, ContributionEvent, EventKind, IssueRecord, IssueState, ProjectProfile, RepoRef};
use crate::recommend::Recommendation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub event_id: String,
    pub actor: String,
    pub kind: EventKind,
    pub timestamp: DateTime<Utc>,
    pub repo: RepoRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueLine {
    pub issue_id: String,
    pub state: IssueState,
    #[serde(default)]
    pub labels: Vec<String>,
    pub created_at: DateTime<Utc>,
}

/// Store header: which repository the file belongs to and its ingestion watermark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLine {
    pub repo: RepoRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Meta(MetaLine),
    Project(ProjectProfile),
    Event(EventLine),
    Issue(IssueLine),
    Recommendation(Recommendation),
}

impl From<&ContributionEvent> for EventLine {
    fn from(event: &ContributionEvent) -> Self {
        Self {
            event_id: event.event_id.clone(),
            actor: event.actor.login.clone(),
            kind: event.kind,
            timestamp: event.timestamp,
            repo: event.repo.clone(),
        }
    }
}

impl From<&IssueRecord> for IssueLine {
    fn from(issue: &IssueRecord) -> Self {
        Self {
            issue_id: issue.issue_id.clone(),
            state: issue.state,
            labels: issue.labels.clone(),
            created_at: issue.created_at,
        }
    }
}

impl EventLine {
    pub fn into_event(self, bots: &BotPolicy) -> Result<ContributionEvent, String> {
        if self.event_id.trim().is_empty() {
            return Err("empty event_id".into());
        }
        let actor = bots.actor(&self.actor).map_err(|e| e.to_string())?;
        Ok(ContributionEvent {
            event_id: self.event_id,
            actor,
            kind: self.kind,
            timestamp: self.timestamp,
            repo: self.repo,
        })
    }
}

impl IssueLine {
    pub fn into_issue(self) -> Result<IssueRecord, String> {
        if self.issue_id.trim().is_empty() {
            return Err("empty issue_id".into());
        }
        Ok(IssueRecord::new(self.issue_id, self.state, self.labels, self.created_at))
    }
}

/// Parses every non-blank line; the first malformed line aborts with its 1-based number.
pub fn read_records(path: &Path) -> Result<Vec<Record>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_records(BufReader::new(file)).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::io(path, source),
        other => other,
    })
}

pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<Record>, IngestError> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(Path::new("<reader>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: index + 1,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_records<'a, I>(path: &Path, records: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = &'a Record>,
{
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| IngestError::io(path, e))?;
    }
    out.flush().map_err(|e| IngestError::io(path, e))?;
    out.get_ref().sync_all().map_err(|e| IngestError::io(path, e))
}

/// Contents of an offline fixture file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixture {
    pub events: Vec<ContributionEvent>,
    pub issues: Vec<IssueRecord>,
    pub project: Option<ProjectProfile>,
}

/// Loads events and issues in file order. Store-only lines (meta, recommendations) are skipped.
pub fn load_fixture(path: &Path, bots: &BotPolicy) -> Result<Fixture, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut fixture = Fixture::default();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| IngestError::Parse {
            line: index + 1,
            reason,
        };
        let record: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        match record {
            Record::Event(event) => fixture.events.push(event.into_event(bots).map_err(parse_err)?),
            Record::Issue(issue) => fixture.issues.push(issue.into_issue().map_err(parse_err)?),
            Record::Project(project) => fixture.project = Some(project),
            Record::Meta(_) | Record::Recommendation(_) => {}
        }
    }
    Ok(fixture)
}

/// Writes a fixture that [`load_fixture`] reads back unchanged.
pub fn export_fixture(path: &Path, fixture: &Fixture) -> Result<(), IngestError> {
    let records: Vec<Record> = fixture
        .project
        .iter()
        .cloned()
        .map(Record::Project)
        .chain(fixture.events.iter().map(|e| Record::Event(e.into())))
        .chain(fixture.issues.iter().map(|i| Record::Issue(i.into())))
        .collect();
    write_records(path, &records)
}
