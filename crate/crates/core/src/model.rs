//! Normalized domain records shared by every stage of the pipeline.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid repository reference {0:?}: expected owner/name without whitespace")]
    InvalidRepo(String),
    #[error("invalid calendar month {0:?}: expected YYYY-MM")]
    InvalidMonth(String),
    #[error("empty login")]
    EmptyLogin,
}

/// A repository on the code-hosting platform, rendered as `owner/name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepoRef {
    owner: String,
    name: String,
}

impl RepoRef {
    pub fn new(owner: &str, name: &str) -> Result<Self, ModelError> {
        let valid = |s: &str| !s.is_empty() && !s.contains('/') && !s.chars().any(char::is_whitespace);
        if !valid(owner) || !valid(name) {
            return Err(ModelError::InvalidRepo(format!("{owner}/{name}")));
        }
        Ok(Self {
            owner: owner.to_string(),
            name: name.to_string(),
        })
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// File-system friendly key, `owner__name`.
    pub fn file_stem(&self) -> String {
        format!("{}__{}", self.owner, self.name)
    }
}

impl fmt::Display for RepoRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

impl FromStr for RepoRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((owner, name)) => {
                Self::new(owner, name).map_err(|_| ModelError::InvalidRepo(s.to_string()))
            }
            None => Err(ModelError::InvalidRepo(s.to_string())),
        }
    }
}

impl Serialize for RepoRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RepoRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Logins treated as automation even without the `[bot]` suffix.
pub const DEFAULT_BOT_DENYLIST: &[&str] = &[
    "dependabot",
    "dependabot-preview",
    "renovate",
    "renovate-bot",
    "greenkeeperio-bot",
    "github-actions",
    "codecov-io",
    "allcontributors",
    "imgbot",
    "snyk-bot",
    "web-flow",
];

/// Decides which logins are automation accounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BotPolicy {
    denylist: BTreeSet<String>,
}

impl Default for BotPolicy {
    fn default() -> Self {
        Self::new(DEFAULT_BOT_DENYLIST.iter().copied())
    }
}

impl BotPolicy {
    pub fn new<I, S>(logins: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            denylist: logins
                .into_iter()
                .map(|l| normalize_login(l.as_ref()))
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    /// Default denylist plus extra logins.
    pub fn with_extra<I, S>(mut self, logins: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.denylist.extend(
            logins
                .into_iter()
                .map(|l| normalize_login(l.as_ref()))
                .filter(|l| !l.is_empty()),
        );
        self
    }

    pub fn is_bot(&self, normalized_login: &str) -> bool {
        normalized_login.ends_with("[bot]") || self.denylist.contains(normalized_login)
    }

    pub fn actor(&self, raw_login: &str) -> Result<ActorId, ModelError> {
        let login = normalize_login(raw_login);
        if login.is_empty() {
            return Err(ModelError::EmptyLogin);
        }
        let is_bot = self.is_bot(&login);
        Ok(ActorId { login, is_bot })
    }
}

pub fn normalize_login(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// A contributor identity. Equality and ordering consider the login only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActorId {
    pub login: String,
    pub is_bot: bool,
}

impl PartialEq for ActorId {
    fn eq(&self, other: &Self) -> bool {
        self.login == other.login
    }
}

impl Eq for ActorId {}

impl PartialOrd for ActorId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ActorId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.login.cmp(&other.login)
    }
}

impl std::hash::Hash for ActorId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.login.hash(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "commit")]
    Commit,
    #[serde(rename = "issue_opened")]
    IssueOpened,
    #[serde(rename = "pr_opened")]
    PullRequestOpened,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [
        EventKind::Commit,
        EventKind::IssueOpened,
        EventKind::PullRequestOpened,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Commit => "commit",
            EventKind::IssueOpened => "issue_opened",
            EventKind::PullRequestOpened => "pr_opened",
        }
    }
}

/// One commit, opened issue or opened pull request by one actor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContributionEvent {
    pub event_id: String,
    pub actor: ActorId,
    pub kind: EventKind,
    pub timestamp: DateTime<Utc>,
    pub repo: RepoRef,
}

impl ContributionEvent {
    pub fn month(&self) -> CalendarMonth {
        CalendarMonth::of(self.timestamp)
    }

    /// Canonical ordering key: timestamp, then event id.
    pub fn sort_key(&self) -> (DateTime<Utc>, &str) {
        (self.timestamp, self.event_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub issue_id: String,
    pub state: IssueState,
    pub labels: Vec<String>,
    pub created_at: DateTime<Utc>,
}

impl IssueRecord {
    /// Builds a record, normalizing and deduplicating labels in first-seen order.
    pub fn new<I, S>(issue_id: impl Into<String>, state: IssueState, labels: I, created_at: DateTime<Utc>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            issue_id: issue_id.into(),
            state,
            labels: normalize_labels(labels),
            created_at,
        }
    }
}

/// Lowercase, trim, and collapse runs of whitespace, underscores and hyphens
/// into a single hyphen: `"Good First  Issue "` becomes `"good-first-issue"`.
pub fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.trim().chars() {
        if ch.is_whitespace() || ch == '-' || ch == '_' {
            pending_sep = true;
            continue;
        }
        if pending_sep && !out.is_empty() {
            out.push('-');
        }
        pending_sep = false;
        out.extend(ch.to_lowercase());
    }
    out
}

pub fn normalize_labels<I, S>(labels: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = BTreeSet::new();
    labels
        .into_iter()
        .map(|l| normalize_label(l.as_ref()))
        .filter(|l| !l.is_empty() && seen.insert(l.clone()))
        .collect()
}

/// Free-text project metadata scanned for social-good goals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectProfile {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub readme: String,
}

/// A UTC calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarMonth {
    year: i32,
    month: u32,
}

impl CalendarMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, ModelError> {
        if !(1..=12).contains(&month) {
            return Err(ModelError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn of(instant: DateTime<Utc>) -> Self {
        Self {
            year: instant.year(),
            month: instant.month(),
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Shifts by a signed number of months.
    pub fn add_months(self, delta: i64) -> Self {
        let index = i64::from(self.year) * 12 + i64::from(self.month - 1) + delta;
        Self {
            year: index.div_euclid(12) as i32,
            month: index.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    /// First instant of the month.
    pub fn start(self) -> DateTime<Utc> {
        let date = NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month");
        Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"))
    }

    /// Last representable instant of the month (inclusive bound).
    pub fn end(self) -> DateTime<Utc> {
        self.succ().start() - chrono::Duration::nanoseconds(1)
    }
}

impl fmt::Display for CalendarMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for CalendarMonth {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidMonth(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for CalendarMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repo_ref_parsing() {
        let repo: RepoRef = "octo/pulse".parse().unwrap();
        assert_eq!(repo.owner(), "octo");
        assert_eq!(repo.to_string(), "octo/pulse");
        assert_eq!(repo.file_stem(), "octo__pulse");
        for bad in ["", "octo", "/pulse", "octo/", "oc to/pulse", "a/b/c", "octo/pu\tlse"] {
            assert!(bad.parse::<RepoRef>().is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("Good First Issue "), "good-first-issue");
        assert_eq!(normalize_label("good_first__issue"), "good-first-issue");
        assert_eq!(normalize_label("  first - timers -- only"), "first-timers-only");
        assert_eq!(normalize_label("-- leading"), "leading");
        assert_eq!(normalize_label("E-easy"), "e-easy");
        assert_eq!(normalize_label("   "), "");
        assert_eq!(
            normalize_labels(["Bug", "bug ", "Good First Issue", "good-first-issue"]),
            vec!["bug", "good-first-issue"]
        );
    }

    #[test]
    fn bot_flagging() {
        let policy = BotPolicy::default();
        assert!(policy.actor("Dependabot[bot]").unwrap().is_bot);
        assert!(policy.actor("renovate").unwrap().is_bot);
        let human = policy.actor("  Alice ").unwrap();
        assert_eq!(human.login, "alice");
        assert!(!human.is_bot);
        assert!(policy.actor("  ").is_err());
        let custom = BotPolicy::default().with_extra(["ci-runner"]);
        assert!(custom.actor("CI-Runner").unwrap().is_bot);
    }

    #[test]
    fn month_arithmetic() {
        let jan: CalendarMonth = "2021-01".parse().unwrap();
        assert_eq!(jan.add_months(-1).to_string(), "2020-12");
        assert_eq!(jan.add_months(5).to_string(), "2021-06");
        assert_eq!(jan.add_months(24).to_string(), "2023-01");
        assert_eq!(jan.add_months(-13).to_string(), "2019-12");
        assert_eq!(jan.start().to_rfc3339(), "2021-01-01T00:00:00+00:00");
        assert_eq!(CalendarMonth::of(jan.end()), jan);
        assert_eq!(CalendarMonth::of(jan.end() + chrono::Duration::nanoseconds(1)), jan.succ());
        assert!("2021-13".parse::<CalendarMonth>().is_err());
        assert!("2021-1".parse::<CalendarMonth>().is_err());
    }
}
