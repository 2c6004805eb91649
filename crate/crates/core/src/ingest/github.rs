//! REST client for a GitHub-compatible API.
//!
//! Commits, issues and pull requests are paged concurrently (100 per page,
//! `Link: rel="next"` pagination) and merged into a deterministic order.
//! Rate-limit responses are retried with exponential backoff.

use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, LINK, RETRY_AFTER, USER_AGENT};
use reqwest::{StatusCode, Url};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tracing::{debug, warn};

use super::{finalize_events, HistoryHorizon, IngestError};
use crate::model::{BotPolicy, ContributionEvent, EventKind, IssueRecord, IssueState, ProjectProfile, RepoRef};

pub const TOKEN_ENV: &str = "COMMUNITY_PULSE_TOKEN";
pub const API_URL_ENV: &str = "COMMUNITY_PULSE_API_URL";
const DEFAULT_API_URL: &str = "https://api.github.com";
const PAGE_SIZE: &str = "100";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(120),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct GithubClient {
    http: reqwest::Client,
    base_url: String,
    token: String,
    retry: RetryPolicy,
    bots: BotPolicy,
}

/// Result of a combined fetch. Endpoint failures that still leave usable data
/// are collected in `failures` instead of aborting.
#[derive(Debug, Default)]
pub struct FetchOutcome {
    pub events: Vec<ContributionEvent>,
    pub issues: Vec<IssueRecord>,
    pub project: Option<ProjectProfile>,
    pub failures: Vec<(String, IngestError)>,
}

impl GithubClient {
    pub fn new(base_url: impl Into<String>, token: impl Into<String>, bots: BotPolicy) -> Self {
        Self {
            http: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token: token.into(),
            retry: RetryPolicy::default(),
            bots,
        }
    }

    /// Reads the token from `COMMUNITY_PULSE_TOKEN` and an optional base URL
    /// override from `COMMUNITY_PULSE_API_URL`.
    pub fn from_env(bots: BotPolicy) -> Result<Self, IngestError> {
        let token = std::env::var(TOKEN_ENV)
            .ok()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| IngestError::Auth(format!("{TOKEN_ENV} is not set")))?;
        let base = std::env::var(API_URL_ENV).unwrap_or_else(|_| DEFAULT_API_URL.to_string());
        Ok(Self::new(base, token, bots))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn repo_url(&self, repo: &RepoRef, tail: &str, params: &[(&str, String)]) -> Result<Url, IngestError> {
        let raw = format!("{}/repos/{}/{}{}", self.base_url, repo.owner(), repo.name(), tail);
        Url::parse_with_params(&raw, params).map_err(|e| IngestError::Http(format!("bad url {raw}: {e}")))
    }

    async fn send(&self, url: &Url, accept: &str) -> Result<reqwest::Response, IngestError> {
        let mut attempt = 0;
        loop {
            let response = self
                .http
                .get(url.clone())
                .header(AUTHORIZATION, format!("Bearer {}", self.token))
                .header(USER_AGENT, "community-pulse")
                .header(ACCEPT, accept)
                .header("X-GitHub-Api-Version", "2022-11-28")
                .send()
                .await
                .map_err(|e| IngestError::Http(e.to_string()))?;
            let status = response.status();
            if status.is_success() {
                return Ok(response);
            }
            let headers = response.headers().clone();
            let retryable = is_rate_limited(status, &headers) || status.is_server_error();
            match status {
                StatusCode::UNAUTHORIZED => return Err(IngestError::Auth(format!("{status} for {url}"))),
                StatusCode::FORBIDDEN if !retryable => return Err(IngestError::Auth(format!("{status} for {url}"))),
                StatusCode::NOT_FOUND => return Err(IngestError::NotFound(url.path().to_string())),
                _ if !retryable => return Err(IngestError::Http(format!("{status} for {url}"))),
                _ => {}
            }
            let hinted = retry_hint(&headers);
            attempt += 1;
            if attempt >= self.retry.max_attempts {
                return Err(if status.is_server_error() {
                    IngestError::Http(format!("{status} for {url} after {attempt} attempts"))
                } else {
                    IngestError::RateLimited { retry_after: hinted }
                });
            }
            let delay = hinted
                .map(|d| d.min(self.retry.max_delay))
                .unwrap_or_else(|| self.retry.backoff(attempt - 1));
            warn!(%url, %status, attempt, ?delay, "retrying request");
            tokio::time::sleep(delay).await;
        }
    }

    /// Follows `rel="next"` links until exhausted or `stop` returns true for a page.
    async fn get_all<T, F>(&self, first: Url, stop: F) -> Result<Vec<T>, IngestError>
    where
        T: DeserializeOwned,
        F: Fn(&[T]) -> bool,
    {
        let mut items = Vec::new();
        let mut next = Some(first);
        while let Some(url) = next.take() {
            let response = self.send(&url, "application/vnd.github+json").await?;
            next = response
                .headers()
                .get(LINK)
                .and_then(|v| v.to_str().ok())
                .and_then(parse_next_link)
                .and_then(|u| Url::parse(&u).ok());
            let page: Vec<T> = response.json().await.map_err(|e| IngestError::Decode(e.to_string()))?;
            debug!(%url, count = page.len(), "fetched page");
            let done = page.is_empty() || stop(&page);
            items.extend(page);
            if done {
                break;
            }
        }
        Ok(items)
    }

    async fn commit_events(
        &self,
        repo: &RepoRef,
        since: Option<DateTime<Utc>>,
        as_of: DateTime<Utc>,
    ) -> Result<Vec<ContributionEvent>, IngestError> {
        let mut params = vec![("per_page", PAGE_SIZE.to_string()), ("until", rfc3339(as_of))];
        if let Some(since) = since {
            params.push(("since", rfc3339(since)));
        }
        let url = self.repo_url(repo, "/commits", &params)?;
        let items: Vec<CommitItem> = self.get_all(url, |_| false).await?;
        Ok(items.into_iter().filter_map(|c| c.into_event(repo, &self.bots)).collect())
    }

    async fn pull_events(&self, repo: &RepoRef, since: Option<DateTime<Utc>>) -> Result<Vec<ContributionEvent>, IngestError> {
        let params = [
            ("per_page", PAGE_SIZE.to_string()),
            ("state", "all".to_string()),
            ("sort", "created".to_string()),
            ("direction", "desc".to_string()),
        ];
        let url = self.repo_url(repo, "/pulls", &params)?;
        // Newest first: stop once a page reaches past the horizon.
        let items: Vec<PullItem> = self
            .get_all(url, |page: &[PullItem]| {
                since.is_some_and(|s| page.last().is_some_and(|p| p.created_at < s))
            })
            .await?;
        Ok(items.into_iter().filter_map(|p| p.into_event(repo, &self.bots)).collect())
    }

    async fn issue_items(&self, repo: &RepoRef, since: Option<DateTime<Utc>>) -> Result<Vec<IssueItem>, IngestError> {
        let mut params = vec![("per_page", PAGE_SIZE.to_string()), ("state", "all".to_string())];
        if let Some(since) = since {
            // `since` filters on last update, which never precedes creation.
            params.push(("since", rfc3339(since)));
        }
        let url = self.repo_url(repo, "/issues", &params)?;
        let items: Vec<IssueItem> = self.get_all(url, |_| false).await?;
        Ok(items.into_iter().filter(|i| i.pull_request.is_none()).collect())
    }

    /// All commit, issue-opened and PR-opened events in `[as_of - horizon, as_of]`.
    pub async fn fetch_events(
        &self,
        repo: &RepoRef,
        as_of: DateTime<Utc>,
        horizon: HistoryHorizon,
    ) -> Result<Vec<ContributionEvent>, IngestError> {
        let since = horizon.since(as_of);
        let (commits, issues, pulls) = tokio::join!(
            self.commit_events(repo, since, as_of),
            self.issue_items(repo, since),
            self.pull_events(repo, since),
        );
        let issue_events = issues?.into_iter().filter_map(|i| i.event(repo, &self.bots));
        let merged = commits?.into_iter().chain(issue_events).chain(pulls?);
        Ok(finalize_events(merged, since, as_of))
    }

    /// Every issue regardless of state, labels normalized.
    pub async fn fetch_issues(&self, repo: &RepoRef) -> Result<Vec<IssueRecord>, IngestError> {
        let mut issues: Vec<IssueRecord> = self.issue_items(repo, None).await?.iter().map(IssueItem::record).collect();
        issues.sort_by(|a, b| a.issue_id.cmp(&b.issue_id));
        Ok(issues)
    }

    /// Repository description, topics and README text.
    pub async fn fetch_project(&self, repo: &RepoRef) -> Result<ProjectProfile, IngestError> {
        let url = self.repo_url(repo, "", &[])?;
        let meta: RepoItem = self
            .send(&url, "application/vnd.github+json")
            .await?
            .json()
            .await
            .map_err(|e| IngestError::Decode(e.to_string()))?;
        let readme_url = self.repo_url(repo, "/readme", &[])?;
        let readme = match self.send(&readme_url, "application/vnd.github.raw+json").await {
            Ok(response) => response.text().await.map_err(|e| IngestError::Decode(e.to_string()))?,
            Err(IngestError::NotFound(_)) => String::new(),
            Err(e) => return Err(e),
        };
        Ok(ProjectProfile {
            description: meta.description.unwrap_or_default(),
            topics: meta.topics.unwrap_or_default(),
            readme,
        })
    }

    /// Fetches events, issues and project metadata concurrently.
    ///
    /// A missing repository or a credential failure is fatal. Any other failure
    /// of a single endpoint is recorded in [`FetchOutcome::failures`] and the
    /// remaining endpoints are still returned.
    pub async fn fetch_all(
        &self,
        repo: &RepoRef,
        as_of: DateTime<Utc>,
        horizon: HistoryHorizon,
    ) -> Result<FetchOutcome, IngestError> {
        // Metadata first: it fails fast on a missing repository or a bad token.
        let project = self.fetch_project(repo).await?;
        let since = horizon.since(as_of);
        let (commits, issues, pulls) = tokio::join!(
            self.commit_events(repo, since, as_of),
            self.issue_items(repo, None),
            self.pull_events(repo, since),
        );

        let mut outcome = FetchOutcome {
            project: Some(project),
            ..FetchOutcome::default()
        };
        let mut raw_events = Vec::new();
        for (endpoint, result) in [("commits", commits), ("pulls", pulls)] {
            match result {
                Ok(events) => raw_events.extend(events),
                Err(e @ IngestError::Auth(_)) => return Err(e),
                Err(e) => outcome.failures.push((endpoint.to_string(), e)),
            }
        }
        match issues {
            Ok(items) => {
                raw_events.extend(items.iter().filter_map(|i| i.event(repo, &self.bots)));
                outcome.issues = items.iter().map(IssueItem::record).collect();
                outcome.issues.sort_by(|a, b| a.issue_id.cmp(&b.issue_id));
            }
            Err(e @ IngestError::Auth(_)) => return Err(e),
            Err(e) => outcome.failures.push(("issues".to_string(), e)),
        }
        outcome.events = finalize_events(raw_events, since, as_of);
        Ok(outcome)
    }
}

fn rfc3339(instant: DateTime<Utc>) -> String {
    instant.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn is_rate_limited(status: StatusCode, headers: &HeaderMap) -> bool {
    if status == StatusCode::TOO_MANY_REQUESTS {
        return true;
    }
    status == StatusCode::FORBIDDEN
        && (headers.contains_key(RETRY_AFTER)
            || headers
                .get("x-ratelimit-remaining")
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v.trim() == "0"))
}

fn retry_hint(headers: &HeaderMap) -> Option<Duration> {
    let header = |name| headers.get(name).and_then(|v| v.to_str().ok()).map(str::trim);
    if let Some(secs) = header(RETRY_AFTER.as_str()).and_then(|v| v.parse::<u64>().ok()) {
        return Some(Duration::from_secs(secs));
    }
    let reset = header("x-ratelimit-reset").and_then(|v| v.parse::<i64>().ok())?;
    let wait = reset - Utc::now().timestamp();
    Some(Duration::from_secs(wait.max(0) as u64))
}

/// Extracts the `rel="next"` target from an RFC 8288 `Link` header.
pub fn parse_next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let mut pieces = part.split(';');
        let target = pieces.next()?.trim();
        let is_next = pieces.any(|p| {
            let p = p.trim();
            p == r#"rel="next""# || p == "rel=next"
        });
        let url = target.strip_prefix('<')?.strip_suffix('>')?;
        is_next.then(|| url.to_string())
    })
}

#[derive(Debug, Deserialize)]
struct UserRef {
    login: String,
}

#[derive(Debug, Deserialize)]
struct GitSignature {
    email: Option<String>,
    date: Option<DateTime<Utc>>,
}

#[derive(Debug, Deserialize)]
struct GitCommit {
    author: Option<GitSignature>,
    committer: Option<GitSignature>,
}

#[derive(Debug, Deserialize)]
struct CommitItem {
    sha: String,
    commit: GitCommit,
    author: Option<UserRef>,
}

impl CommitItem {
    fn into_event(self, repo: &RepoRef, bots: &BotPolicy) -> Option<ContributionEvent> {
        let signature = self.commit.author.as_ref().or(self.commit.committer.as_ref());
        let timestamp = signature.and_then(|s| s.date)?;
        let login = match self.author {
            Some(user) => user.login,
            None => {
                let email = signature.and_then(|s| s.email.as_deref())?;
                let local = email.split('@').next().unwrap_or_default().trim().to_lowercase();
                if local.is_empty() {
                    warn!(sha = %self.sha, "commit without login or usable email skipped");
                    return None;
                }
                format!("email:{local}")
            }
        };
        Some(ContributionEvent {
            event_id: format!("commit:{}", self.sha),
            actor: bots.actor(&login).ok()?,
            kind: EventKind::Commit,
            timestamp,
            repo: repo.clone(),
        })
    }
}

#[derive(Debug, Deserialize)]
struct LabelItem {
    name: String,
}

#[derive(Debug, Deserialize)]
struct IssueItem {
    number: u64,
    state: String,
    #[serde(default)]
    labels: Vec<LabelItem>,
    created_at: DateTime<Utc>,
    user: Option<UserRef>,
    pull_request: Option<serde_json::Value>,
}

impl IssueItem {
    fn event(&self, repo: &RepoRef, bots: &BotPolicy) -> Option<ContributionEvent> {
        Some(ContributionEvent {
            event_id: format!("issue:{}", self.number),
            actor: bots.actor(&self.user.as_ref()?.login).ok()?,
            kind: EventKind::IssueOpened,
            timestamp: self.created_at,
            repo: repo.clone(),
        })
    }

    fn record(&self) -> IssueRecord {
        let state = if self.state.eq_ignore_ascii_case("open") {
            IssueState::Open
        } else {
            IssueState::Closed
        };
        IssueRecord::new(
            self.number.to_string(),
            state,
            self.labels.iter().map(|l| l.name.as_str()),
            self.created_at,
        )
    }
}

#[derive(Debug, Deserialize)]
struct PullItem {
    number: u64,
    created_at: DateTime<Utc>,
    user: Option<UserRef>,
}

impl PullItem {
    fn into_event(self, repo: &RepoRef, bots: &BotPolicy) -> Option<ContributionEvent> {
        Some(ContributionEvent {
            event_id: format!("pr:{}", self.number),
            actor: bots.actor(&self.user?.login).ok()?,
            kind: EventKind::PullRequestOpened,
            timestamp: self.created_at,
            repo: repo.clone(),
        })
    }
}

#[derive(Debug, Deserialize)]
struct RepoItem {
    description: Option<String>,
    topics: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_link_extraction() {
        let header = r#"<https://api.github.com/repositories/1/issues?page=2>; rel="next", <https://api.github.com/repositories/1/issues?page=5>; rel="last""#;
        assert_eq!(
            parse_next_link(header).as_deref(),
            Some("https://api.github.com/repositories/1/issues?page=2")
        );
        let last_page = r#"<https://x/issues?page=1>; rel="first", <https://x/issues?page=4>; rel="prev""#;
        assert_eq!(parse_next_link(last_page), None);
        assert_eq!(parse_next_link(""), None);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let policy = RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(5),
        };
        let delays: Vec<_> = (0..5).map(|a| policy.backoff(a).as_secs()).collect();
        assert_eq!(delays, vec![1, 2, 4, 5, 5]);
    }

    #[test]
    fn commit_without_login_falls_back_to_email() {
        let raw = r#"{"sha":"abc","author":null,"commit":{"author":{"email":"Jane.Doe@example.org","date":"2021-03-01T00:00:00Z"},"committer":null}}"#;
        let item: CommitItem = serde_json::from_str(raw).unwrap();
        let event = item.into_event(&"o/n".parse().unwrap(), &BotPolicy::default()).unwrap();
        assert_eq!(event.actor.login, "email:jane.doe");
        assert_eq!(event.event_id, "commit:abc");
    }
}
