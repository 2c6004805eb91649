//! End-to-end composition shared by the CLI and the HTTP service.

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::analytics::{
    build_profiles, cohort_trends, detect_newcomers, rising_contributors, AnalysisParams, AnalysisWindow,
    AnalyticsError, Membership, MonthlyCohortStats, RisingContributor,
};
use crate::ingest::{FetchOutcome, Fixture};
use crate::model::RepoRef;
use crate::recommend::{generate, GenerateConfig, GenerateInputs, Recommendation, RecommendationState};
use crate::signals::{detect_project_goals, label_coverage, GoalTag, GoalTaxonomy, IssueLabelStats, LabelCatalog};
use crate::store::StoreSnapshot;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("{0} has no ingested data")]
    NotIngested(RepoRef),
}

/// Everything an analysis run needs besides the store.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub params: AnalysisParams,
    pub membership: Membership,
    pub catalog: LabelCatalog,
    pub taxonomy: GoalTaxonomy,
    pub coverage_threshold_percent: f64,
    pub suggested_labels: Vec<String>,
    /// List team members among rising contributors and badge them too.
    pub include_members: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let generate = GenerateConfig::default();
        Self {
            params: AnalysisParams::default(),
            membership: Membership::default(),
            catalog: LabelCatalog::builtin(),
            taxonomy: GoalTaxonomy::builtin(),
            coverage_threshold_percent: generate.coverage_threshold_percent,
            suggested_labels: generate.suggested_labels,
            include_members: false,
        }
    }
}

impl PipelineConfig {
    pub fn generate_config(&self) -> GenerateConfig {
        GenerateConfig {
            coverage_threshold_percent: self.coverage_threshold_percent,
            suggested_labels: self.suggested_labels.clone(),
            exclude_members: !self.include_members,
            rising_threshold: self.params.threshold,
        }
    }
}

/// Pure analytics and signals for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub window: AnalysisWindow,
    pub newcomers: usize,
    pub insufficient_history: bool,
    pub trends: Vec<MonthlyCohortStats>,
    /// All rising contributors, members included.
    pub rising: Vec<RisingContributor>,
    pub labels: IssueLabelStats,
    pub goals: Vec<GoalTag>,
}

impl Analysis {
    pub fn rising_filtered(&self, include_members: bool) -> Vec<RisingContributor> {
        self.rising
            .iter()
            .filter(|r| include_members || !r.is_team_member)
            .cloned()
            .collect()
    }
}

/// Analysis instant of a snapshot: its watermark, else its latest event.
pub fn snapshot_as_of(snapshot: &StoreSnapshot) -> Result<DateTime<Utc>, PipelineError> {
    snapshot
        .as_of
        .or_else(|| snapshot.latest_event())
        .ok_or_else(|| PipelineError::NotIngested(snapshot.repo.clone()))
}

pub fn analyze(snapshot: &StoreSnapshot, config: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let as_of = snapshot_as_of(snapshot)?;
    let params = AnalysisParams::new(config.params.window_months, config.params.threshold)?;
    let window = AnalysisWindow::new(as_of, params.window_months)?;
    // Only history up to the watermark is considered.
    let events = snapshot
        .query_window(DateTime::<Utc>::MIN_UTC, as_of)
        .expect("MIN_UTC precedes every instant");
    let profiles = build_profiles(&events, &config.membership);
    let newcomers = detect_newcomers(&profiles, &window);
    let trends = cohort_trends(&profiles, &newcomers, &window);
    let rising = rising_contributors(&profiles, &newcomers, &window, params.threshold);
    let labels = label_coverage(&snapshot.issues(), &config.catalog);
    let project = snapshot.project.clone().unwrap_or_default();
    let goals = detect_project_goals(&project, &config.taxonomy);
    Ok(Analysis {
        window,
        newcomers: newcomers.len(),
        insufficient_history: newcomers.insufficient_history,
        trends,
        rising,
        labels,
        goals,
    })
}

/// Wakes expired snoozes at `clock_now`, then merges freshly generated
/// recommendations (stamped with the analysis instant). Returns how many were added.
pub fn refresh_recommendations(
    snapshot: &mut StoreSnapshot,
    analysis: &Analysis,
    config: &PipelineConfig,
    clock_now: DateTime<Utc>,
) -> usize {
    snapshot.recommendations.wake_expired(clock_now);
    let readme = snapshot.project.as_ref().map(|p| p.readme.as_str()).unwrap_or_default();
    let generated = generate(
        &GenerateInputs {
            window: &analysis.window,
            labels: &analysis.labels,
            goals: &analysis.goals,
            readme,
            rising: &analysis.rising,
        },
        &config.generate_config(),
        analysis.window.as_of,
    );
    snapshot.recommendations.merge_generated(generated)
}

/// Adds fixture contents for `snapshot.repo` and advances the watermark to
/// `as_of`, or to the latest fixture event when not given. Returns new event count.
pub fn ingest_fixture(snapshot: &mut StoreSnapshot, fixture: Fixture, as_of: Option<DateTime<Utc>>) -> usize {
    let repo = snapshot.repo.clone();
    let (events, foreign): (Vec<_>, Vec<_>) = fixture.events.into_iter().partition(|e| e.repo == repo);
    if !foreign.is_empty() {
        tracing::warn!(skipped = foreign.len(), %repo, "fixture events for other repositories ignored");
    }
    let watermark = as_of.or_else(|| events.iter().map(|e| e.timestamp).max());
    let added = snapshot.upsert_events(events);
    snapshot.upsert_issues(fixture.issues);
    if let Some(project) = fixture.project {
        snapshot.project = Some(project);
    }
    if let Some(watermark) = watermark {
        snapshot.advance_watermark(watermark);
    }
    added
}

/// Adds live API results and advances the watermark to `as_of`.
pub fn ingest_fetched(snapshot: &mut StoreSnapshot, outcome: FetchOutcome, as_of: DateTime<Utc>) -> usize {
    let added = snapshot.upsert_events(outcome.events);
    snapshot.upsert_issues(outcome.issues);
    if let Some(project) = outcome.project {
        snapshot.project = Some(project);
    }
    snapshot.advance_watermark(as_of);
    added
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub events_new: usize,
    pub newcomers: usize,
    pub rising: usize,
    pub recommendations_pending: usize,
}

impl IngestReport {
    pub fn new(events_new: usize, analysis: &Analysis, snapshot: &StoreSnapshot, include_members: bool) -> Self {
        Self {
            events_new,
            newcomers: analysis.newcomers,
            rising: analysis.rising_filtered(include_members).len(),
            recommendations_pending: snapshot.recommendations.count(RecommendationState::Pending),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub as_of: DateTime<Utc>,
    pub months: u32,
    pub first: crate::model::CalendarMonth,
    pub last: crate::model::CalendarMonth,
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalsReport {
    pub method: &'static str,
    pub tags: Vec<GoalTag>,
}

/// The document printed by `analyze --format json` and served by the report endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub repo: RepoRef,
    pub window: WindowSummary,
    pub newcomers: usize,
    pub insufficient_history: bool,
    pub trends: Vec<MonthlyCohortStats>,
    pub rising: Vec<RisingContributor>,
    pub labels: IssueLabelStats,
    pub goals: GoalsReport,
    pub recommendations: Vec<Recommendation>,
}

impl AnalysisReport {
    pub fn new(snapshot: &StoreSnapshot, analysis: &Analysis, config: &PipelineConfig) -> Self {
        Self {
            repo: snapshot.repo.clone(),
            window: WindowSummary {
                as_of: analysis.window.as_of,
                months: analysis.window.window_months,
                first: analysis.window.first(),
                last: analysis.window.last(),
                threshold: config.params.threshold,
            },
            newcomers: analysis.newcomers,
            insufficient_history: analysis.insufficient_history,
            trends: analysis.trends.clone(),
            rising: analysis.rising_filtered(config.include_members),
            labels: analysis.labels.clone(),
            goals: GoalsReport {
                method: "keyword-based",
                tags: analysis.goals.clone(),
            },
            recommendations: snapshot.recommendations.list(Some(RecommendationState::Pending)),
        }
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}
