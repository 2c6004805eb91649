//! Maintainer recommendations and their accept/dismiss/snooze lifecycle.
//!
//! ```text
//! Pending --accept--> Accepted
//! Pending --dismiss-> Dismissed
//! Pending --snooze--> Snoozed --wake / expiry--> Pending
//! ```
//!
//! Accepted and Dismissed are terminal. Regeneration never touches an
//! existing id, so neither state can be resurrected.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{AnalysisWindow, KindCounts, RisingContributor};
use crate::signals::{badge_markdown, has_goal_badge, GoalEvidence, GoalTag, IssueLabelStats};

pub const DEFAULT_SNOOZE_DAYS: i64 = 30;
pub const DEFAULT_COVERAGE_THRESHOLD_PERCENT: f64 = 10.0;
pub const DEFAULT_SUGGESTED_LABELS: [&str; 2] = ["good-first-issue", "first-timers-only"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    AddNewcomerLabel,
    AddGoalBadge,
    RisingContributorBadge,
}

impl RecommendationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AddNewcomerLabel => "add_newcomer_label",
            Self::AddGoalBadge => "add_goal_badge",
            Self::RisingContributorBadge => "rising_contributor_badge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationState {
    Pending,
    Accepted,
    Dismissed,
    Snoozed,
}

impl RecommendationState {
    pub const ALL: [Self; 4] = [Self::Pending, Self::Accepted, Self::Dismissed, Self::Snoozed];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Accepted => "accepted",
            Self::Dismissed => "dismissed",
            Self::Snoozed => "snoozed",
        }
    }
}

impl fmt::Display for RecommendationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RecommendationState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown state {s:?}"))
    }
}

/// Evidence behind a recommendation, enough to re-derive it from the store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "snake_case")]
pub enum Rationale {
    LabelCoverage {
        coverage_percent: f64,
        threshold_percent: f64,
        open_issues: u32,
        newcomer_labeled_open: u32,
        matched_labels: BTreeSet<String>,
    },
    GoalKeywords {
        /// Always `keyword-based`: categories come from a keyword taxonomy, not a classifier.
        method: String,
        evidence: Vec<GoalEvidence>,
        suggested_markdown: String,
    },
    ConsistentActivity {
        active_months: BTreeSet<crate::model::CalendarMonth>,
        totals: KindCounts,
        threshold: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub kind: RecommendationKind,
    pub target: String,
    pub window: String,
    pub rationale: Rationale,
    pub state: RecommendationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snooze_until: Option<DateTime<Utc>>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Deterministic id for a `(kind, target, window)` triple.
pub fn recommendation_id(kind: RecommendationKind, target: &str, window_key: &str) -> String {
    let digest = Sha256::digest(format!("{}\x1f{}\x1f{}", kind.as_str(), target, window_key));
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("rec-{hex}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    /// AddNewcomerLabel fires only while coverage is below this percentage.
    pub coverage_threshold_percent: f64,
    /// Catalog labels proposed when missing from the project.
    pub suggested_labels: Vec<String>,
    /// When set, team members get no rising-contributor badge.
    pub exclude_members: bool,
    pub rising_threshold: u32,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            coverage_threshold_percent: DEFAULT_COVERAGE_THRESHOLD_PERCENT,
            suggested_labels: DEFAULT_SUGGESTED_LABELS.iter().map(|s| s.to_string()).collect(),
            exclude_members: true,
            rising_threshold: crate::analytics::DEFAULT_RISING_THRESHOLD,
        }
    }
}

/// Analytics and signal outputs a generation pass draws from.
#[derive(Debug, Clone, Copy)]
pub struct GenerateInputs<'a> {
    pub window: &'a AnalysisWindow,
    pub labels: &'a IssueLabelStats,
    pub goals: &'a [GoalTag],
    pub readme: &'a str,
    pub rising: &'a [RisingContributor],
}

/// Fresh pending recommendations for the current inputs, sorted by id.
pub fn generate(inputs: &GenerateInputs<'_>, config: &GenerateConfig, now: DateTime<Utc>) -> Vec<Recommendation> {
    let window_key = inputs.window.key();
    let make = |kind, target: &str, rationale| Recommendation {
        id: recommendation_id(kind, target, &window_key),
        kind,
        target: target.to_string(),
        window: window_key.clone(),
        rationale,
        state: RecommendationState::Pending,
        snooze_until: None,
        created_at: now,
        updated_at: now,
    };

    let mut out = Vec::new();
    let labels = inputs.labels;
    if labels.coverage_percent < config.coverage_threshold_percent {
        for label in &config.suggested_labels {
            if labels.matched_labels.contains(label) {
                continue;
            }
            out.push(make(
                RecommendationKind::AddNewcomerLabel,
                label,
                Rationale::LabelCoverage {
                    coverage_percent: labels.coverage_percent,
                    threshold_percent: config.coverage_threshold_percent,
                    open_issues: labels.open_issues,
                    newcomer_labeled_open: labels.newcomer_labeled_open,
                    matched_labels: labels.matched_labels.clone(),
                },
            ));
        }
    }

    for goal in inputs.goals {
        if has_goal_badge(inputs.readme, &goal.category) {
            continue;
        }
        out.push(make(
            RecommendationKind::AddGoalBadge,
            &goal.category,
            Rationale::GoalKeywords {
                method: "keyword-based".into(),
                evidence: goal.evidence.clone(),
                suggested_markdown: badge_markdown(&goal.category),
            },
        ));
    }

    for riser in inputs.rising {
        if config.exclude_members && riser.is_team_member {
            continue;
        }
        out.push(make(
            RecommendationKind::RisingContributorBadge,
            &riser.login,
            Rationale::ConsistentActivity {
                active_months: riser.active_months.clone(),
                totals: riser.totals,
                threshold: config.rising_threshold,
            },
        ));
    }

    out.sort_by(|a, b| a.id.cmp(&b.id));
    out.dedup_by(|a, b| a.id == b.id);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Accept,
    Dismiss,
    /// `None` snoozes for [`DEFAULT_SNOOZE_DAYS`].
    Snooze(Option<DateTime<Utc>>),
    /// Manual return of a snoozed item to pending.
    Wake,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Accept => "accept",
            Action::Dismiss => "dismiss",
            Action::Snooze(_) => "snooze",
            Action::Wake => "wake",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecommendError {
    #[error("recommendation {0} not found")]
    NotFound(String),
    #[error("cannot {action} a {from} recommendation")]
    IllegalTransition {
        from: RecommendationState,
        action: &'static str,
    },
    #[error("snooze target {until} is not after {now}")]
    InvalidSnooze { until: DateTime<Utc>, now: DateTime<Utc> },
}

/// State reached by applying `action` in `from`, if the transition is legal.
pub fn transition(from: RecommendationState, action: &Action) -> Option<RecommendationState> {
    use RecommendationState::*;
    match (from, action) {
        (Pending, Action::Accept) => Some(Accepted),
        (Pending, Action::Dismiss) => Some(Dismissed),
        (Pending, Action::Snooze(_)) => Some(Snoozed),
        (Snoozed, Action::Wake) => Some(Pending),
        _ => None,
    }
}

/// All recommendations of one project, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecommendationSet {
    items: BTreeMap<String, Recommendation>,
}

impl RecommendationSet {
    pub fn get(&self, id: &str) -> Option<&Recommendation> {
        self.items.get(id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Recommendation> {
        self.items.values()
    }

    /// Inserts or replaces by id. Used when loading persisted state.
    pub fn insert(&mut self, rec: Recommendation) {
        self.items.insert(rec.id.clone(), rec);
    }

    /// Adds generated recommendations whose ids are new; existing ids keep
    /// their record untouched. Returns the number added.
    pub fn merge_generated(&mut self, generated: Vec<Recommendation>) -> usize {
        let mut added = 0;
        for rec in generated {
            if let Entry::Vacant(slot) = self.items.entry(rec.id.clone()) {
                slot.insert(rec);
                added += 1;
            }
        }
        added
    }

    pub fn apply_action(
        &mut self,
        id: &str,
        action: Action,
        now: DateTime<Utc>,
    ) -> Result<&Recommendation, RecommendError> {
        let rec = self.items.get_mut(id).ok_or_else(|| RecommendError::NotFound(id.to_string()))?;
        let next = transition(rec.state, &action).ok_or(RecommendError::IllegalTransition {
            from: rec.state,
            action: action.name(),
        })?;
        let snooze_until = match action {
            Action::Snooze(until) => {
                let until = until.unwrap_or(now + Duration::days(DEFAULT_SNOOZE_DAYS));
                if until <= now {
                    return Err(RecommendError::InvalidSnooze { until, now });
                }
                Some(until)
            }
            _ => None,
        };
        rec.state = next;
        rec.snooze_until = snooze_until;
        rec.updated_at = now;
        Ok(rec)
    }

    /// Returns every snoozed item whose snooze has expired to pending.
    pub fn wake_expired(&mut self, now: DateTime<Utc>) -> usize {
        let mut woken = 0;
        for rec in self.items.values_mut() {
            if rec.state == RecommendationState::Snoozed && rec.snooze_until.is_some_and(|u| u <= now) {
                rec.state = RecommendationState::Pending;
                rec.snooze_until = None;
                rec.updated_at = now;
                woken += 1;
            }
        }
        woken
    }

    /// Items in display order (kind, target, window, id), optionally filtered by state.
    pub fn list(&self, state: Option<RecommendationState>) -> Vec<Recommendation> {
        let mut out: Vec<_> = self
            .items
            .values()
            .filter(|r| state.is_none_or(|s| r.state == s))
            .cloned()
            .collect();
        out.sort_by(|a, b| {
            (a.kind, &a.target, &a.window, &a.id).cmp(&(b.kind, &b.target, &b.window, &b.id))
        });
        out
    }

    pub fn count(&self, state: RecommendationState) -> usize {
        self.items.values().filter(|r| r.state == state).count()
    }
}
