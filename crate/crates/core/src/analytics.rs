//! Newcomer cohorts, monthly joining/activity/retention trends, per-contributor
//! activity and rising-contributor detection.
//!
//! All month arithmetic is done on UTC calendar months. A contributor is
//! *active* in a month when they have at least one event of any kind in it.
//! A *newcomer* is a contributor whose first known contribution falls inside
//! the analysis window. A *rising contributor* is a newcomer active in at least
//! `threshold` distinct months of the window.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_login, ActorId, CalendarMonth, ContributionEvent, EventKind};

pub const DEFAULT_WINDOW_MONTHS: u32 = 6;
pub const DEFAULT_RISING_THRESHOLD: u32 = 3;
/// Upper bound accepted for configurable windows (ten years).
pub const MAX_WINDOW_MONTHS: u32 = 120;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("window must be between 1 and {MAX_WINDOW_MONTHS} months, got {0}")]
    InvalidWindow(u32),
    #[error("threshold must be between 1 and the window length {window}, got {threshold}")]
    InvalidThreshold { threshold: u32, window: u32 },
}

/// Window length and rising threshold, validated together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub window_months: u32,
    pub threshold: u32,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            window_months: DEFAULT_WINDOW_MONTHS,
            threshold: DEFAULT_RISING_THRESHOLD,
        }
    }
}

impl AnalysisParams {
    pub fn new(window_months: u32, threshold: u32) -> Result<Self, AnalyticsError> {
        if window_months == 0 || window_months > MAX_WINDOW_MONTHS {
            return Err(AnalyticsError::InvalidWindow(window_months));
        }
        if threshold == 0 || threshold > window_months {
            return Err(AnalyticsError::InvalidThreshold {
                threshold,
                window: window_months,
            });
        }
        Ok(Self {
            window_months,
            threshold,
        })
    }
}

/// The trailing `window_months` calendar months ending with the month of `as_of`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisWindow {
    pub as_of: DateTime<Utc>,
    pub window_months: u32,
    pub months: Vec<CalendarMonth>,
}

impl AnalysisWindow {
    pub fn new(as_of: DateTime<Utc>, window_months: u32) -> Result<Self, AnalyticsError> {
        if window_months == 0 || window_months > MAX_WINDOW_MONTHS {
            return Err(AnalyticsError::InvalidWindow(window_months));
        }
        let last = CalendarMonth::of(as_of);
        let months = (0..window_months)
            .rev()
            .map(|back| last.add_months(-i64::from(back)))
            .collect();
        Ok(Self {
            as_of,
            window_months,
            months,
        })
    }

    pub fn first(&self) -> CalendarMonth {
        self.months[0]
    }

    pub fn last(&self) -> CalendarMonth {
        *self.months.last().expect("window is nonempty")
    }

    pub fn contains(&self, month: CalendarMonth) -> bool {
        self.first() <= month && month <= self.last()
    }

    /// Stable textual key, e.g. `2021-01..2021-06`.
    pub fn key(&self) -> String {
        format!("{}..{}", self.first(), self.last())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KindCounts {
    pub commits: u32,
    pub issues: u32,
    pub prs: u32,
}

impl KindCounts {
    pub fn record(&mut self, kind: EventKind) {
        match kind {
            EventKind::Commit => self.commits += 1,
            EventKind::IssueOpened => self.issues += 1,
            EventKind::PullRequestOpened => self.prs += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.commits + self.issues + self.prs
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }
}

impl std::ops::AddAssign for KindCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.commits += rhs.commits;
        self.issues += rhs.issues;
        self.prs += rhs.prs;
    }
}

/// Logins of team (often paid) members, used to focus recognition on volunteers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Membership(BTreeSet<String>);

impl Membership {
    pub fn new<I, S>(logins: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            logins
                .into_iter()
                .map(|l| normalize_login(l.as_ref()))
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    /// One login per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or_default().trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn contains(&self, login: &str) -> bool {
        self.0.contains(login)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContributorProfile {
    pub actor: ActorId,
    pub first_contribution_month: CalendarMonth,
    pub monthly_counts: BTreeMap<CalendarMonth, KindCounts>,
    pub is_team_member: bool,
}

impl ContributorProfile {
    pub fn is_active_in(&self, month: CalendarMonth) -> bool {
        self.monthly_counts.get(&month).is_some_and(|c| !c.is_zero())
    }

    pub fn active_months_in<'w>(&'w self, window: &'w AnalysisWindow) -> impl Iterator<Item = CalendarMonth> + 'w {
        window.months.iter().copied().filter(|m| self.is_active_in(*m))
    }
}

/// One profile per non-bot actor, sorted by login.
pub fn build_profiles(events: &[ContributionEvent], membership: &Membership) -> Vec<ContributorProfile> {
    let mut by_login: BTreeMap<&str, ContributorProfile> = BTreeMap::new();
    for event in events.iter().filter(|e| !e.actor.is_bot) {
        let month = event.month();
        let profile = by_login
            .entry(event.actor.login.as_str())
            .or_insert_with(|| ContributorProfile {
                actor: event.actor.clone(),
                first_contribution_month: month,
                monthly_counts: BTreeMap::new(),
                is_team_member: membership.contains(&event.actor.login),
            });
        profile.first_contribution_month = profile.first_contribution_month.min(month);
        profile.monthly_counts.entry(month).or_default().record(event.kind);
    }
    by_login.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Newcomers {
    pub logins: BTreeSet<String>,
    /// Set when no supplied history predates the window, so long-time
    /// contributors may be misclassified as newcomers.
    pub insufficient_history: bool,
}

impl Newcomers {
    pub fn contains(&self, login: &str) -> bool {
        self.logins.contains(login)
    }

    pub fn len(&self) -> usize {
        self.logins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logins.is_empty()
    }
}

/// Actors whose first contribution month lies inside the window.
pub fn detect_newcomers(profiles: &[ContributorProfile], window: &AnalysisWindow) -> Newcomers {
    let logins = profiles
        .iter()
        .filter(|p| window.contains(p.first_contribution_month))
        .map(|p| p.actor.login.clone())
        .collect();
    let earliest = profiles.iter().map(|p| p.first_contribution_month).min();
    let insufficient_history = earliest.is_none_or(|m| m >= window.first());
    if insufficient_history && !profiles.is_empty() {
        tracing::warn!(window = %window.key(), "no history before the analysis window; newcomer detection may over-count");
    }
    Newcomers {
        logins,
        insufficient_history,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyCohortStats {
    pub month: CalendarMonth,
    pub joined: u32,
    pub active: u32,
    pub retained: u32,
}

/// Joining, activity and within-window retention counts for each window month.
pub fn cohort_trends(
    profiles: &[ContributorProfile],
    newcomers: &Newcomers,
    window: &AnalysisWindow,
) -> Vec<MonthlyCohortStats> {
    let cohort: Vec<&ContributorProfile> = profiles
        .iter()
        .filter(|p| newcomers.contains(&p.actor.login))
        .collect();
    window
        .months
        .iter()
        .map(|&month| {
            let mut stats = MonthlyCohortStats {
                month,
                joined: 0,
                active: 0,
                retained: 0,
            };
            for profile in &cohort {
                if profile.is_active_in(month) {
                    stats.active += 1;
                }
                if profile.first_contribution_month == month {
                    stats.joined += 1;
                    let returns = month < window.last()
                        && profile
                            .monthly_counts
                            .range(month.succ()..=window.last())
                            .any(|(_, c)| !c.is_zero());
                    if returns {
                        stats.retained += 1;
                    }
                }
            }
            stats
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisingContributor {
    pub login: String,
    pub is_team_member: bool,
    pub active_months: BTreeSet<CalendarMonth>,
    pub totals: KindCounts,
    pub detected_at: DateTime<Utc>,
}

/// Newcomers active in at least `threshold` distinct window months, ordered by
/// active-month count (desc), total events in window (desc), then login.
pub fn rising_contributors(
    profiles: &[ContributorProfile],
    newcomers: &Newcomers,
    window: &AnalysisWindow,
    threshold: u32,
) -> Vec<RisingContributor> {
    let mut rising: Vec<RisingContributor> = profiles
        .iter()
        .filter(|p| !p.actor.is_bot && newcomers.contains(&p.actor.login))
        .filter_map(|p| {
            let active_months: BTreeSet<_> = p.active_months_in(window).collect();
            (active_months.len() >= threshold as usize).then(|| RisingContributor {
                login: p.actor.login.clone(),
                is_team_member: p.is_team_member,
                active_months,
                totals: activity_summary(p, window),
                detected_at: window.as_of,
            })
        })
        .collect();
    rising.sort_by(|a, b| {
        b.active_months
            .len()
            .cmp(&a.active_months.len())
            .then(b.totals.total().cmp(&a.totals.total()))
            .then(a.login.cmp(&b.login))
    });
    rising
}

/// Per-kind totals over the window months only.
pub fn activity_summary(profile: &ContributorProfile, window: &AnalysisWindow) -> KindCounts {
    let mut totals = KindCounts::default();
    for (_, counts) in profile.monthly_counts.range(window.first()..=window.last()) {
        totals += *counts;
    }
    totals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BotPolicy;

    fn ev(id: &str, login: &str, kind: EventKind, ts: &str) -> ContributionEvent {
        ContributionEvent {
            event_id: id.into(),
            actor: BotPolicy::default().actor(login).unwrap(),
            kind,
            timestamp: ts.parse().unwrap(),
            repo: "o/n".parse().unwrap(),
        }
    }

    fn window() -> AnalysisWindow {
        AnalysisWindow::new("2021-06-15T00:00:00Z".parse().unwrap(), 6).unwrap()
    }

    fn m(s: &str) -> CalendarMonth {
        s.parse().unwrap()
    }

    #[test]
    fn window_months_are_consecutive_and_end_at_as_of() {
        let w = window();
        let months: Vec<_> = w.months.iter().map(ToString::to_string).collect();
        assert_eq!(months, ["2021-01", "2021-02", "2021-03", "2021-04", "2021-05", "2021-06"]);
        assert_eq!(w.key(), "2021-01..2021-06");
        let wrap = AnalysisWindow::new("2021-02-01T00:00:00Z".parse().unwrap(), 3).unwrap();
        assert_eq!(wrap.first(), m("2020-12"));
        assert!(AnalysisWindow::new(w.as_of, 0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AnalysisParams::new(6, 3).is_ok());
        assert!(AnalysisParams::new(6, 6).is_ok());
        assert_eq!(
            AnalysisParams::new(6, 7),
            Err(AnalyticsError::InvalidThreshold { threshold: 7, window: 6 })
        );
        assert!(AnalysisParams::new(6, 0).is_err());
        assert!(AnalysisParams::new(0, 0).is_err());
        assert!(AnalysisParams::new(MAX_WINDOW_MONTHS + 1, 1).is_err());
    }

    #[test]
    fn profiles_bucket_by_month_and_skip_bots() {
        let events = vec![
            ev("1", "alice", EventKind::Commit, "2021-01-03T00:00:00Z"),
            ev("2", "alice", EventKind::Commit, "2021-03-03T00:00:00Z"),
            ev("3", "alice", EventKind::IssueOpened, "2021-03-04T00:00:00Z"),
            ev("4", "dependabot[bot]", EventKind::PullRequestOpened, "2021-03-04T00:00:00Z"),
        ];
        let profiles = build_profiles(&events, &Membership::new(["Alice"]));
        assert_eq!(profiles.len(), 1);
        let alice = &profiles[0];
        assert!(alice.is_team_member);
        assert_eq!(alice.monthly_counts.len(), 2);
        assert_eq!(alice.first_contribution_month, m("2021-01"));
        assert_eq!(alice.monthly_counts[&m("2021-03")], KindCounts { commits: 1, issues: 1, prs: 0 });
    }

    #[test]
    fn prior_contributors_are_not_newcomers() {
        let events = vec![
            ev("1", "veteran", EventKind::Commit, "2020-11-10T00:00:00Z"),
            ev("2", "veteran", EventKind::Commit, "2021-02-10T00:00:00Z"),
            ev("3", "fresh", EventKind::Commit, "2021-04-10T00:00:00Z"),
        ];
        let profiles = build_profiles(&events, &Membership::default());
        let newcomers = detect_newcomers(&profiles, &window());
        assert_eq!(newcomers.logins, BTreeSet::from(["fresh".to_string()]));
        assert!(!newcomers.insufficient_history);
    }

    #[test]
    fn missing_prior_history_is_flagged() {
        let events = vec![ev("1", "a", EventKind::Commit, "2021-04-10T00:00:00Z")];
        let profiles = build_profiles(&events, &Membership::default());
        assert!(detect_newcomers(&profiles, &window()).insufficient_history);
    }

    #[test]
    fn single_newcomer_month_one_only() {
        let events = vec![ev("1", "a", EventKind::Commit, "2021-01-10T00:00:00Z")];
        let w = window();
        let profiles = build_profiles(&events, &Membership::default());
        let trends = cohort_trends(&profiles, &detect_newcomers(&profiles, &w), &w);
        let joined: Vec<_> = trends.iter().map(|t| t.joined).collect();
        let active: Vec<_> = trends.iter().map(|t| t.active).collect();
        let retained: Vec<_> = trends.iter().map(|t| t.retained).collect();
        assert_eq!(joined, [1, 0, 0, 0, 0, 0]);
        assert_eq!(active, [1, 0, 0, 0, 0, 0]);
        assert_eq!(retained, [0; 6]);
    }

    #[test]
    fn return_in_later_month_counts_as_retained() {
        let events = vec![
            ev("1", "a", EventKind::Commit, "2021-01-10T00:00:00Z"),
            ev("2", "a", EventKind::PullRequestOpened, "2021-04-10T00:00:00Z"),
        ];
        let w = window();
        let profiles = build_profiles(&events, &Membership::default());
        let trends = cohort_trends(&profiles, &detect_newcomers(&profiles, &w), &w);
        assert_eq!(trends[0].retained, 1);
        assert_eq!(trends[3].active, 1);
        assert_eq!(trends[3].joined, 0);
    }

    #[test]
    fn rising_rule_three_of_six() {
        let mut events = Vec::new();
        for (i, month) in ["01", "03", "05"].iter().enumerate() {
            events.push(ev(&format!("r{i}"), "riser", EventKind::Commit, &format!("2021-{month}-02T00:00:00Z")));
        }
        for (i, month) in ["02", "06"].iter().enumerate() {
            events.push(ev(&format!("s{i}"), "sporadic", EventKind::IssueOpened, &format!("2021-{month}-02T00:00:00Z")));
        }
        events.push(ev("v0", "veteran", EventKind::Commit, "2019-01-01T00:00:00Z"));
        for month in 1..=6 {
            events.push(ev(&format!("v{month}"), "veteran", EventKind::Commit, &format!("2021-{month:02}-02T00:00:00Z")));
        }
        let w = window();
        let profiles = build_profiles(&events, &Membership::default());
        let newcomers = detect_newcomers(&profiles, &w);
        let rising = rising_contributors(&profiles, &newcomers, &w, 3);
        assert_eq!(rising.len(), 1);
        assert_eq!(rising[0].login, "riser");
        assert_eq!(rising[0].active_months.len(), 3);
        assert_eq!(rising[0].totals, KindCounts { commits: 3, issues: 0, prs: 0 });
        assert_eq!(rising[0].detected_at, w.as_of);
    }

    #[test]
    fn rising_ordering() {
        let mut events = Vec::new();
        let mut add = |login: &str, months: &[u32], per_month: usize| {
            for &mo in months {
                for k in 0..per_month {
                    events.push(ev(
                        &format!("{login}-{mo}-{k}"),
                        login,
                        EventKind::Commit,
                        &format!("2021-{mo:02}-0{}T00:00:00Z", k + 1),
                    ));
                }
            }
        };
        add("zed", &[1, 2, 3, 4], 1);
        add("bob", &[1, 2, 3], 2);
        add("amy", &[2, 3, 4], 2);
        add("cat", &[1, 2, 3], 1);
        let w = window();
        let profiles = build_profiles(&events, &Membership::default());
        let rising = rising_contributors(&profiles, &detect_newcomers(&profiles, &w), &w, 3);
        let order: Vec<_> = rising.iter().map(|r| r.login.as_str()).collect();
        assert_eq!(order, ["zed", "amy", "bob", "cat"]);
    }

    #[test]
    fn summary_ignores_out_of_window_activity() {
        let events = vec![
            ev("0", "a", EventKind::Commit, "2020-12-31T23:59:59Z"),
            ev("1", "a", EventKind::Commit, "2021-02-01T00:00:00Z"),
            ev("2", "a", EventKind::Commit, "2021-02-11T00:00:00Z"),
            ev("3", "a", EventKind::IssueOpened, "2021-06-30T23:59:59Z"),
        ];
        let profiles = build_profiles(&events, &Membership::default());
        assert_eq!(activity_summary(&profiles[0], &window()), KindCounts { commits: 2, issues: 1, prs: 0 });
        let old = build_profiles(&events[..1], &Membership::default());
        assert_eq!(activity_summary(&old[0], &window()), KindCounts::default());
    }

    #[test]
    fn membership_file_parsing() {
        let membership = Membership::parse("# staff\nAlice\n\n  bob  # contractor\n");
        assert!(membership.contains("alice"));
        assert!(membership.contains("bob"));
        assert_eq!(membership.iter().count(), 2);
    }
}
