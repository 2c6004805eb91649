//! Randomized fixtures and brute-force oracles.
//!
//! Oracles work on raw events with plain integer month indices
//! (`year * 12 + month0`) and never call the analytics module.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, TimeZone, Utc};
use community_pulse_core::{BotPolicy, ContributionEvent, EventKind, RepoRef};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn month_index(ts: DateTime<Utc>) -> i64 {
    i64::from(ts.year()) * 12 + i64::from(ts.month0())
}

pub fn month_label(index: i64) -> String {
    format!("{:04}-{:02}", index.div_euclid(12), index.rem_euclid(12) + 1)
}

fn instant_in(index: i64, rng: &mut StdRng) -> DateTime<Utc> {
    let year = index.div_euclid(12) as i32;
    let month = index.rem_euclid(12) as u32 + 1;
    Utc.with_ymd_and_hms(year, month, rng.random_range(1..=28), rng.random_range(0..24), rng.random_range(0..60), 0)
        .unwrap()
}

/// A generated history plus the parameters it was built for.
#[derive(Debug, Clone)]
pub struct SyntheticHistory {
    pub events: Vec<ContributionEvent>,
    pub as_of: DateTime<Utc>,
    pub window_months: u32,
    /// Month indices of the window, oldest first.
    pub window: Vec<i64>,
    pub members: BTreeSet<String>,
}

/// Actors with 0..=window active months, some with pre-window history,
/// some bots, some team members.
pub fn synthetic_history(seed: u64, window_months: u32) -> SyntheticHistory {
    let mut rng = StdRng::seed_from_u64(seed);
    let bots = BotPolicy::default();
    let repo: RepoRef = "synth/project".parse().unwrap();
    let last = i64::from(2019 + rng.random_range(0..4)) * 12 + rng.random_range(0..12);
    let first = last - i64::from(window_months) + 1;
    let window: Vec<i64> = (first..=last).collect();
    let as_of = instant_in(last, &mut rng).with_day(28).unwrap();

    let mut events = Vec::new();
    let mut members = BTreeSet::new();
    let actors = rng.random_range(1..=14);
    let mut seq = 0u32;
    for a in 0..actors {
        let login = match rng.random_range(0..10) {
            0 => format!("helper{a}[bot]"),
            1 => "dependabot".to_string(),
            _ => format!("user{a}"),
        };
        if rng.random_bool(0.2) {
            members.insert(login.clone());
        }
        let mut months: Vec<i64> = Vec::new();
        if rng.random_bool(0.3) {
            let back = rng.random_range(1..=18);
            months.push(first - back);
        }
        let active_target = rng.random_range(0..=window_months as usize);
        let mut pool = window.clone();
        for _ in 0..active_target {
            let pick = rng.random_range(0..pool.len());
            months.push(pool.swap_remove(pick));
        }
        for month in months {
            for _ in 0..rng.random_range(1..=3) {
                seq += 1;
                let kind = EventKind::ALL[rng.random_range(0..3)];
                let mut timestamp = instant_in(month, &mut rng);
                if month == last && timestamp > as_of {
                    timestamp = as_of;
                }
                events.push(ContributionEvent {
                    event_id: format!("ev{seq:05}"),
                    actor: bots.actor(&login).unwrap(),
                    kind,
                    timestamp,
                    repo: repo.clone(),
                });
            }
        }
    }
    // File order is arbitrary.
    for i in (1..events.len()).rev() {
        events.swap(i, rng.random_range(0..=i));
    }
    SyntheticHistory {
        events,
        as_of,
        window_months,
        window,
        members,
    }
}

fn human_events(events: &[ContributionEvent]) -> impl Iterator<Item = &ContributionEvent> {
    events.iter().filter(|e| !e.actor.is_bot)
}

/// Logins whose earliest event month lies in the window.
pub fn oracle_newcomers(events: &[ContributionEvent], window: &[i64]) -> BTreeSet<String> {
    let mut earliest: BTreeMap<&str, i64> = BTreeMap::new();
    for e in human_events(events) {
        let m = month_index(e.timestamp);
        let entry = earliest.entry(&e.actor.login).or_insert(m);
        if m < *entry {
            *entry = m;
        }
    }
    earliest
        .into_iter()
        .filter(|(_, m)| window.contains(m))
        .map(|(l, _)| l.to_string())
        .collect()
}

fn has_event(events: &[ContributionEvent], login: &str, month: i64) -> bool {
    human_events(events).any(|e| e.actor.login == login && month_index(e.timestamp) == month)
}

/// `(month, joined, active, retained)` per window month, by triple loop.
pub fn oracle_trends(events: &[ContributionEvent], window: &[i64]) -> Vec<(String, u32, u32, u32)> {
    let newcomers = oracle_newcomers(events, window);
    window
        .iter()
        .map(|&t| {
            let (mut joined, mut active, mut retained) = (0, 0, 0);
            for login in &newcomers {
                let first = human_events(events)
                    .filter(|e| &e.actor.login == login)
                    .map(|e| month_index(e.timestamp))
                    .min()
                    .unwrap();
                if has_event(events, login, t) {
                    active += 1;
                }
                if first == t {
                    joined += 1;
                    if window.iter().filter(|&&m| m > t).any(|&m| has_event(events, login, m)) {
                        retained += 1;
                    }
                }
            }
            (month_label(t), joined, active, retained)
        })
        .collect()
}

/// Newcomers with at least `threshold` distinct active window months.
pub fn oracle_rising(events: &[ContributionEvent], window: &[i64], threshold: u32) -> BTreeSet<String> {
    oracle_newcomers(events, window)
        .into_iter()
        .filter(|login| window.iter().filter(|&&m| has_event(events, login, m)).count() >= threshold as usize)
        .collect()
}

/// `(commits, issues, prs)` for one login inside the window.
pub fn oracle_activity(events: &[ContributionEvent], login: &str, window: &[i64]) -> (u32, u32, u32) {
    let mut totals = (0, 0, 0);
    for e in human_events(events).filter(|e| e.actor.login == login && window.contains(&month_index(e.timestamp))) {
        match e.kind {
            EventKind::Commit => totals.0 += 1,
            EventKind::IssueOpened => totals.1 += 1,
            EventKind::PullRequestOpened => totals.2 += 1,
        }
    }
    totals
}

/// Whole-word containment by checking every byte offset directly.
pub fn oracle_whole_word(text: &str, keyword: &str) -> bool {
    let text = text.to_lowercase();
    let keyword = keyword.to_lowercase();
    if keyword.is_empty() || keyword.len() > text.len() {
        return false;
    }
    (0..=text.len() - keyword.len()).any(|start| {
        if !text.is_char_boundary(start) || !text.is_char_boundary(start + keyword.len()) {
            return false;
        }
        if text.as_bytes()[start..start + keyword.len()] != *keyword.as_bytes() {
            return false;
        }
        let before_ok = text[..start].chars().last().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = text[start + keyword.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        before_ok && after_ok
    })
}
