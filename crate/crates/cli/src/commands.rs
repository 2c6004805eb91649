//! Argument definitions and subcommand implementations.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use community_pulse_api::{ServiceConfig, StoreLocation};
use community_pulse_core::analytics::{AnalysisParams, Membership};
use community_pulse_core::ingest::{load_fixture, GithubClient, HistoryHorizon};
use community_pulse_core::pipeline::{
    analyze, ingest_fetched, ingest_fixture, refresh_recommendations, Analysis, AnalysisReport, IngestReport,
    PipelineConfig,
};
use community_pulse_core::signals::{GoalTaxonomy, LabelCatalog};
use community_pulse_core::store::{Store, DEFAULT_STORE_DIR};
use community_pulse_core::{BotPolicy, RepoRef};

use crate::{catalog, output};

#[derive(Debug, Parser)]
#[command(name = "community-pulse", version, about = "Newcomer and community-health analytics for a repository")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add events and issues to the store from a fixture or the live API.
    Ingest {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print trends, rising contributors, label and goal signals, and pending recommendations.
    Analyze {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write monthly joined/active/retained counts as CSV.
    ExportTrends {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the JSON API and dashboard.
    Serve {
        /// Store directory, or a single store file.
        #[arg(long, default_value = DEFAULT_STORE_DIR)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        /// Directory with the built dashboard, served at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Mine all history on live ingestion instead of window plus two years.
        #[arg(long)]
        full_history: bool,
        /// Extra bot logins, one per line.
        #[arg(long)]
        bots: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Rebuild the newcomer label catalog from a curated list (file or URL).
    RefreshCatalog {
        #[arg(long)]
        source: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Which repository, where its store lives, and where new data comes from.
#[derive(Debug, Args)]
pub struct Target {
    #[arg(long)]
    pub repo: RepoRef,
    /// Store file, or a directory holding `owner__name.ndjson`.
    /// Defaults to `./.community-pulse/owner__name.ndjson`.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Offline event file to ingest instead of calling the API.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Fetch from the live API even when the store already has data.
    #[arg(long, conflicts_with = "fixture")]
    pub fetch: bool,
    /// Analysis instant (RFC 3339). Defaults to the store watermark.
    #[arg(long)]
    pub as_of: Option<DateTime<Utc>>,
    /// Mine all history on live ingestion instead of window plus two years.
    #[arg(long)]
    pub full_history: bool,
    /// Extra bot logins, one per line.
    #[arg(long)]
    pub bots: Option<PathBuf>,
}

/// Analysis parameters shared by every command that analyzes.
#[derive(Debug, Clone, Args)]
pub struct Tuning {
    #[arg(long, default_value_t = community_pulse_core::analytics::DEFAULT_WINDOW_MONTHS)]
    pub window: u32,
    #[arg(long, default_value_t = community_pulse_core::analytics::DEFAULT_RISING_THRESHOLD)]
    pub threshold: u32,
    /// Team member logins, one per line.
    #[arg(long)]
    pub membership: Option<PathBuf>,
    /// Keep team members among rising contributors.
    #[arg(long)]
    pub include_members: bool,
    /// Replacement newcomer label catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Replacement goal keyword taxonomy.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

/// How a command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some live endpoints failed; whatever was fetched was stored and analyzed.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial => 2,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Tuning {
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig {
            params: AnalysisParams::new(self.window, self.threshold)?,
            include_members: self.include_members,
            ..PipelineConfig::default()
        };
        if let Some(path) = &self.membership {
            config.membership = Membership::parse(&read(path)?);
        }
        if let Some(path) = &self.catalog {
            config.catalog = LabelCatalog::parse(&read(path)?).with_context(|| format!("{}", path.display()))?;
        }
        if let Some(path) = &self.taxonomy {
            config.taxonomy = GoalTaxonomy::parse(&read(path)?).with_context(|| format!("{}", path.display()))?;
        }
        Ok(config)
    }
}

fn bot_policy(path: Option<&Path>) -> Result<BotPolicy> {
    let bots = BotPolicy::default();
    Ok(match path {
        Some(path) => bots.with_extra(
            read(path)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect::<Vec<_>>(),
        ),
        None => bots,
    })
}

fn horizon(full_history: bool, window: u32) -> HistoryHorizon {
    if full_history {
        HistoryHorizon::Full
    } else {
        HistoryHorizon::for_window(window)
    }
}

/// Store file for `repo`: `--store` as a file or directory, else the default location.
pub fn store_path(store: Option<&Path>, repo: &RepoRef) -> PathBuf {
    match store {
        Some(path) => StoreLocation::from_path(path).path_for(repo),
        None => Store::default_path(repo),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

/// Store after ingestion and recommendation refresh, with the analysis it was refreshed from.
pub struct Prepared {
    pub store: Store,
    pub config: PipelineConfig,
    pub analysis: Analysis,
    pub events_new: usize,
    pub outcome: Outcome,
}

/// Ingests from the fixture, or from the live API when `force_fetch` is set or
/// the store is empty; then analyzes, refreshes recommendations and saves.
pub fn prepare(target: &Target, tuning: &Tuning, force_fetch: bool) -> Result<Prepared> {
    let config = tuning.pipeline_config()?;
    let bots = bot_policy(target.bots.as_deref())?;
    let path = store_path(target.store.as_deref(), &target.repo);
    let mut store = Store::open(&path, &target.repo, &bots)?;
    let mut outcome = Outcome::Complete;

    let events_new = if let Some(fixture_path) = &target.fixture {
        let fixture = load_fixture(fixture_path, &bots)?;
        ingest_fixture(&mut store.snapshot, fixture, target.as_of)
    } else if force_fetch || target.fetch || store.snapshot.event_count() == 0 {
        let client = GithubClient::from_env(bots.clone())?;
        let as_of = target.as_of.unwrap_or_else(Utc::now);
        let fetched = runtime()?.block_on(client.fetch_all(
            &target.repo,
            as_of,
            horizon(target.full_history, tuning.window),
        ))?;
        for (endpoint, error) in &fetched.failures {
            eprintln!("warning: {endpoint}: {error}");
            outcome = Outcome::Partial;
        }
        ingest_fetched(&mut store.snapshot, fetched, as_of)
    } else {
        0
    };

    // An explicit instant overrides the watermark for this analysis only.
    let analysis = match target.as_of {
        Some(as_of) if store.snapshot.as_of != Some(as_of) => {
            let mut view = store.snapshot.clone();
            view.as_of = Some(as_of);
            analyze(&view, &config)?
        }
        _ => analyze(&store.snapshot, &config)?,
    };
    refresh_recommendations(&mut store.snapshot, &analysis, &config, Utc::now());
    store.save()?;
    Ok(Prepared {
        store,
        config,
        analysis,
        events_new,
        outcome,
    })
}

impl Prepared {
    pub fn report(&self) -> AnalysisReport {
        AnalysisReport::new(&self.store.snapshot, &self.analysis, &self.config)
    }

    pub fn ingest_report(&self) -> IngestReport {
        IngestReport::new(self.events_new, &self.analysis, &self.store.snapshot, self.config.include_members)
    }
}

/// Runs one command, writing results to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<Outcome> {
    match cli.command {
        Command::Ingest { target, tuning, format } => {
            let prepared = prepare(&target, &tuning, target.fixture.is_none())?;
            let report = prepared.ingest_report();
            match format {
                Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?,
                Format::Text => write!(stdout, "{}", output::render_ingest_text(&report))?,
                Format::Csv => bail!("ingest does not support csv output"),
            }
            Ok(prepared.outcome)
        }
        Command::Analyze { target, tuning, format } => {
            let prepared = prepare(&target, &tuning, false)?;
            let report = prepared.report();
            match format {
                Format::Json => write!(stdout, "{}", report.to_canonical_json())?,
                Format::Text => write!(stdout, "{}", output::render_text(&report))?,
                Format::Csv => write!(stdout, "{}", output::trends_csv(&report.trends))?,
            }
            Ok(prepared.outcome)
        }
        Command::ExportTrends { target, tuning, out } => {
            let prepared = prepare(&target, &tuning, false)?;
            output::write_atomic(&out, &output::trends_csv(&prepared.analysis.trends))?;
            Ok(prepared.outcome)
        }
        Command::Serve {
            store,
            port,
            bind,
            ui_dir,
            full_history,
            bots,
            tuning,
        } => {
            let pipeline = tuning.pipeline_config()?;
            let mut config = ServiceConfig::new(StoreLocation::from_path(store));
            config.horizon = Some(horizon(full_history, pipeline.params.window_months));
            config.pipeline = pipeline;
            config.bots = bot_policy(bots.as_deref())?;
            config.ui_dir = ui_dir;
            runtime()?.block_on(async {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(bind, port))
                    .await
                    .with_context(|| format!("binding {bind}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                community_pulse_api::serve(config, listener).await.context("serving")
            })?;
            Ok(Outcome::Complete)
        }
        Command::RefreshCatalog { source, out } => {
            let text = runtime()?.block_on(catalog::read_source(&source))?;
            let refreshed = catalog::write_catalog(&text, &out)?;
            eprintln!("wrote {} labels to {}", refreshed.labels().len(), out.display());
            Ok(Outcome::Complete)
        }
    }
}
