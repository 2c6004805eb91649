//! Repository mining and community-health analytics for open-source maintainers.
//!
//! The crate ingests contribution events (commits, opened issues, opened pull
//! requests) and issue labels, derives newcomer cohorts and rising
//! contributors, measures newcomer-friendly label coverage, detects
//! social-good goals, and manages the resulting recommendations through an
//! accept / dismiss / snooze lifecycle.

pub mod analytics;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod recommend;
pub mod signals;
pub mod store;

pub use model::{ActorId, BotPolicy, CalendarMonth, ContributionEvent, EventKind, IssueRecord, IssueState, RepoRef};
