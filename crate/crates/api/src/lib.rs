//! HTTP service over community-pulse stores.
//!
//! JSON endpoints live under `/api/v1`; `/` serves the dashboard's static
//! files when a UI directory is configured, and a small index page otherwise.

mod error;
mod state;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::response::Html;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use community_pulse_core::analytics::{AnalysisParams, MonthlyCohortStats, RisingContributor};
use community_pulse_core::ingest::{load_fixture, GithubClient, HistoryHorizon};
use community_pulse_core::model::{BotPolicy, RepoRef};
use community_pulse_core::pipeline::{
    analyze, ingest_fetched, ingest_fixture, refresh_recommendations, Analysis, AnalysisReport, IngestReport,
    PipelineConfig, PipelineError,
};
use community_pulse_core::recommend::{Action, Recommendation, RecommendationState};
use community_pulse_core::store::StoreSnapshot;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorCode};
pub use state::{Snapshots, StoreLocation};

/// Everything the service needs at startup.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store: StoreLocation,
    pub pipeline: PipelineConfig,
    pub bots: BotPolicy,
    /// History mined by live ingestion; `None` means window plus the default extra history.
    pub horizon: Option<HistoryHorizon>,
    /// Live API client; built from the environment on demand when absent.
    pub github: Option<GithubClient>,
    /// Directory holding the built dashboard.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(store: StoreLocation) -> Self {
        Self {
            store,
            pipeline: PipelineConfig::default(),
            bots: BotPolicy::default(),
            horizon: None,
            github: None,
            ui_dir: None,
        }
    }
}

struct AppState {
    config: ServiceConfig,
    snapshots: Snapshots,
}

type Shared = State<Arc<AppState>>;

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        snapshots: Snapshots::new(config.store.clone(), config.bots.clone()),
        config,
    });
    let api = Router::new()
        .route("/projects", get(list_projects))
        .route("/projects/{owner}/{name}/trends", get(trends))
        .route("/projects/{owner}/{name}/rising", get(rising))
        .route("/projects/{owner}/{name}/recommendations", get(recommendations))
        .route("/projects/{owner}/{name}/report", get(report))
        .route("/projects/{owner}/{name}/ingest", post(ingest))
        .route("/recommendations/{id}/action", post(act))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") });
    let app = Router::new().nest("/api/v1", api);
    let app = match &state.config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(index)),
    };
    app.with_state(state)
}

/// Serves on `listener` until Ctrl-C.
pub async fn serve(config: ServiceConfig, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn index() -> Html<&'static str> {
    Html(include_str!("index.html"))
}

fn repo_of(owner: &str, name: &str) -> Result<RepoRef, ApiError> {
    RepoRef::new(owner, name).map_err(|e| ApiError::new(ErrorCode::InvalidRepo, e.to_string()))
}

fn query_map(query: Result<Query<HashMap<String, String>>, QueryRejection>) -> Result<HashMap<String, String>, ApiError> {
    query
        .map(|Query(q)| q)
        .map_err(|e| ApiError::new(ErrorCode::InvalidQuery, e.body_text()))
}

fn parse_u32(query: &HashMap<String, String>, key: &str, code: ErrorCode) -> Result<Option<u32>, ApiError> {
    query
        .get(key)
        .map(|raw| {
            raw.parse::<u32>()
                .map_err(|_| ApiError::new(code, format!("{key} must be a positive integer, got {raw:?}")))
        })
        .transpose()
}

/// Applies `window`, `threshold` and `include_members` query overrides to the
/// service defaults. With `clamp_threshold`, an unspecified threshold is capped
/// at the window length (the trends view does not use it).
fn overrides(
    base: &PipelineConfig,
    query: &HashMap<String, String>,
    clamp_threshold: bool,
) -> Result<PipelineConfig, ApiError> {
    let mut config = base.clone();
    let window = parse_u32(query, "window", ErrorCode::InvalidWindow)?.unwrap_or(base.params.window_months);
    let threshold = match parse_u32(query, "threshold", ErrorCode::InvalidThreshold)? {
        Some(t) => t,
        None if clamp_threshold => base.params.threshold.min(window.max(1)),
        None => base.params.threshold,
    };
    config.params = AnalysisParams::new(window, threshold)?;
    if let Some(raw) = query.get("include_members") {
        config.include_members = raw.parse().map_err(|_| {
            ApiError::new(ErrorCode::InvalidQuery, format!("include_members must be true or false, got {raw:?}"))
        })?;
    }
    Ok(config)
}

fn run_analysis(snapshot: &StoreSnapshot, config: &PipelineConfig) -> Result<Analysis, ApiError> {
    analyze(snapshot, config).map_err(|e| match e {
        PipelineError::Analytics(e) => e.into(),
        PipelineError::NotIngested(repo) => {
            ApiError::new(ErrorCode::NotIngested, format!("{repo} has not been ingested"))
        }
    })
}

#[derive(Debug, Serialize)]
struct ProjectSummary {
    repo: RepoRef,
    as_of: Option<DateTime<Utc>>,
    events: usize,
    recommendations_pending: usize,
}

async fn list_projects(State(state): Shared) -> Json<Vec<ProjectSummary>> {
    Json(
        state
            .snapshots
            .all()
            .iter()
            .map(|s| ProjectSummary {
                repo: s.repo.clone(),
                as_of: s.as_of,
                events: s.event_count(),
                recommendations_pending: s.recommendations.count(RecommendationState::Pending),
            })
            .collect(),
    )
}

async fn trends(
    State(state): Shared,
    Path((owner, name)): Path<(String, String)>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<Vec<MonthlyCohortStats>>, ApiError> {
    let repo = repo_of(&owner, &name)?;
    let config = overrides(&state.config.pipeline, &query_map(query)?, true)?;
    let snapshot = state.snapshots.read(&repo)?;
    Ok(Json(run_analysis(&snapshot, &config)?.trends))
}

async fn rising(
    State(state): Shared,
    Path((owner, name)): Path<(String, String)>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<Vec<RisingContributor>>, ApiError> {
    let repo = repo_of(&owner, &name)?;
    let config = overrides(&state.config.pipeline, &query_map(query)?, false)?;
    let snapshot = state.snapshots.read(&repo)?;
    Ok(Json(run_analysis(&snapshot, &config)?.rising_filtered(config.include_members)))
}

async fn recommendations(
    State(state): Shared,
    Path((owner, name)): Path<(String, String)>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<Vec<Recommendation>>, ApiError> {
    let repo = repo_of(&owner, &name)?;
    let query = query_map(query)?;
    let filter = match query.get("state").map(String::as_str) {
        None | Some("all") => None,
        Some(raw) => Some(raw.parse::<RecommendationState>().map_err(|_| {
            ApiError::new(
                ErrorCode::InvalidState,
                format!("state must be one of pending, accepted, dismissed, snoozed, all; got {raw:?}"),
            )
        })?),
    };
    let snapshot = state.snapshots.read(&repo)?;
    Ok(Json(snapshot.recommendations.list(filter)))
}

async fn report(
    State(state): Shared,
    Path((owner, name)): Path<(String, String)>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<AnalysisReport>, ApiError> {
    let repo = repo_of(&owner, &name)?;
    let config = overrides(&state.config.pipeline, &query_map(query)?, false)?;
    let snapshot = state.snapshots.read(&repo)?;
    let analysis = run_analysis(&snapshot, &config)?;
    Ok(Json(AnalysisReport::new(&snapshot, &analysis, &config)))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ActionName {
    Accept,
    Dismiss,
    Snooze,
    Wake,
}

#[derive(Debug, Deserialize)]
struct ActionRequest {
    action: ActionName,
    #[serde(default)]
    until: Option<String>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(ErrorCode::InvalidBody, e.body_text()))
}

async fn act(
    State(state): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<Recommendation>, ApiError> {
    let request = body(payload)?;
    let until = request
        .until
        .as_deref()
        .map(|raw| {
            DateTime::parse_from_rfc3339(raw)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| ApiError::new(ErrorCode::InvalidUntil, format!("until {raw:?}: {e}")))
        })
        .transpose()?;
    let action = match request.action {
        ActionName::Accept => Action::Accept,
        ActionName::Dismiss => Action::Dismiss,
        ActionName::Snooze => Action::Snooze(until),
        ActionName::Wake => Action::Wake,
    };
    let owner = state
        .snapshots
        .all()
        .into_iter()
        .find(|s| s.recommendations.get(&id).is_some())
        .map(|s| s.repo.clone())
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("recommendation {id} not found")))?;
    let updated = state
        .snapshots
        .write(&owner, |snapshot| {
            Ok(snapshot.recommendations.apply_action(&id, action, Utc::now())?.clone())
        })
        .await?;
    Ok(Json(updated))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Source {
    Api,
    Fixture,
}

#[derive(Debug, Deserialize)]
struct IngestRequest {
    source: Source,
    #[serde(default)]
    path: Option<PathBuf>,
    /// Analysis instant; defaults to the latest fixture event, or now for the live API.
    #[serde(default)]
    as_of: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize)]
struct IngestResponse {
    #[serde(flatten)]
    report: IngestReport,
    /// Endpoints that failed during live ingestion; the rest was stored.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    partial_failures: Vec<String>,
}

async fn ingest(
    State(state): Shared,
    Path((owner, name)): Path<(String, String)>,
    payload: Result<Json<IngestRequest>, JsonRejection>,
) -> Result<Json<IngestResponse>, ApiError> {
    let repo = repo_of(&owner, &name)?;
    let request = body(payload)?;
    let config = &state.config.pipeline;

    enum Loaded {
        Fixture(community_pulse_core::ingest::Fixture),
        Fetched(community_pulse_core::ingest::FetchOutcome, DateTime<Utc>),
    }
    let loaded = match request.source {
        Source::Fixture => {
            let path = request
                .path
                .ok_or_else(|| ApiError::new(ErrorCode::BadFixture, "fixture ingestion requires a path"))?;
            let fixture = load_fixture(&path, &state.config.bots)
                .map_err(|e| ApiError::new(ErrorCode::BadFixture, format!("{}: {e}", path.display())))?;
            Loaded::Fixture(fixture)
        }
        Source::Api => {
            let client = match &state.config.github {
                Some(client) => client.clone(),
                None => GithubClient::from_env(state.config.bots.clone()).map_err(error::upstream)?,
            };
            let as_of = request.as_of.unwrap_or_else(Utc::now);
            let horizon = state
                .config
                .horizon
                .unwrap_or_else(|| HistoryHorizon::for_window(config.params.window_months));
            let outcome = client.fetch_all(&repo, as_of, horizon).await.map_err(error::upstream)?;
            Loaded::Fetched(outcome, as_of)
        }
    };

    let response = state
        .snapshots
        .write(&repo, |snapshot| {
            let (events_new, partial_failures) = match loaded {
                Loaded::Fixture(fixture) => (ingest_fixture(snapshot, fixture, request.as_of), Vec::new()),
                Loaded::Fetched(mut outcome, as_of) => {
                    let failures = std::mem::take(&mut outcome.failures)
                        .into_iter()
                        .map(|(endpoint, e)| format!("{endpoint}: {e}"))
                        .collect();
                    (ingest_fetched(snapshot, outcome, as_of), failures)
                }
            };
            let analysis = run_analysis(snapshot, config)?;
            refresh_recommendations(snapshot, &analysis, config, Utc::now());
            Ok(IngestResponse {
                report: IngestReport::new(events_new, &analysis, snapshot, config.include_members),
                partial_failures,
            })
        })
        .await?;
    Ok(Json(response))
}

