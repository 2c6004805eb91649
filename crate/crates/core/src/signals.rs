//! Attract-side project signals: newcomer-friendly label coverage over the
//! issue tracker, and social-good goal tags detected from project text.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_label, IssueRecord, IssueState, ProjectProfile};

const BUILTIN_CATALOG: &str = include_str!("../data/newcomer_labels.txt");
const BUILTIN_TAXONOMY: &str = include_str!("../data/goal_taxonomy.txt");

/// Labels every catalog must carry.
pub const REQUIRED_LABELS: [&str; 2] = ["good-first-issue", "first-timers-only"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalsError {
    #[error("label catalog is empty")]
    EmptyCatalog,
    #[error("label catalog is missing required label {0:?}")]
    MissingRequiredLabel(&'static str),
    #[error("taxonomy line {line}: {reason}")]
    Taxonomy { line: usize, reason: String },
    #[error("taxonomy is empty")]
    EmptyTaxonomy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCatalog {
    labels: BTreeSet<String>,
    source_note: String,
}

impl LabelCatalog {
    /// Parses one label per line. Lines are normalized on read; `#` lines are
    /// comments and the first comment becomes the source note.
    pub fn parse(text: &str) -> Result<Self, SignalsError> {
        let mut source_note = String::new();
        let mut labels = BTreeSet::new();
        for line in text.lines().map(str::trim) {
            if let Some(comment) = line.strip_prefix('#') {
                if source_note.is_empty() {
                    source_note = comment.trim().to_string();
                }
                continue;
            }
            let label = normalize_label(line);
            if !label.is_empty() {
                labels.insert(label);
            }
        }
        Self::new(labels, source_note)
    }

    pub fn new<I, S>(labels: I, source_note: impl Into<String>) -> Result<Self, SignalsError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels: BTreeSet<String> = labels
            .into_iter()
            .map(|l| normalize_label(l.as_ref()))
            .filter(|l| !l.is_empty())
            .collect();
        if labels.is_empty() {
            return Err(SignalsError::EmptyCatalog);
        }
        if let Some(missing) = REQUIRED_LABELS.iter().find(|l| !labels.contains(**l)) {
            return Err(SignalsError::MissingRequiredLabel(missing));
        }
        Ok(Self {
            labels,
            source_note: source_note.into(),
        })
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATALOG).expect("bundled catalog is valid")
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.labels.contains(normalized)
    }

    pub fn labels(&self) -> &BTreeSet<String> {
        &self.labels
    }

    pub fn source_note(&self) -> &str {
        &self.source_note
    }

    pub fn insert(&mut self, label: &str) {
        let label = normalize_label(label);
        if !label.is_empty() {
            self.labels.insert(label);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueLabelStats {
    pub total_issues: u32,
    pub open_issues: u32,
    pub newcomer_labeled_open: u32,
    pub matched_labels: BTreeSet<String>,
    pub coverage_percent: f64,
}

/// Share of open issues carrying a catalog label, plus which catalog labels
/// the project uses anywhere.
pub fn label_coverage(issues: &[IssueRecord], catalog: &LabelCatalog) -> IssueLabelStats {
    let mut stats = IssueLabelStats {
        total_issues: issues.len() as u32,
        open_issues: 0,
        newcomer_labeled_open: 0,
        matched_labels: BTreeSet::new(),
        coverage_percent: 0.0,
    };
    for issue in issues {
        stats
            .matched_labels
            .extend(issue.labels.iter().filter(|l| catalog.contains(l)).cloned());
        if issue.state == IssueState::Open {
            stats.open_issues += 1;
            if issue.labels.iter().any(|l| catalog.contains(l)) {
                stats.newcomer_labeled_open += 1;
            }
        }
    }
    if stats.open_issues > 0 {
        stats.coverage_percent = 100.0 * f64::from(stats.newcomer_labeled_open) / f64::from(stats.open_issues);
    }
    stats
}

/// Category → lowercase keywords, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalTaxonomy {
    categories: Vec<(String, Vec<String>)>,
}

impl GoalTaxonomy {
    /// Line format `category: keyword, keyword, ...`; `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, SignalsError> {
        let mut categories: Vec<(String, Vec<String>)> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| SignalsError::Taxonomy {
                line: index + 1,
                reason: reason.to_string(),
            };
            let (category, keywords) = line.split_once(':').ok_or_else(|| err("missing ':'"))?;
            let category = category.trim().to_lowercase();
            if category.is_empty() {
                return Err(err("empty category"));
            }
            let keywords: Vec<String> = keywords
                .split(',')
                .map(|k| k.trim().to_lowercase())
                .filter(|k| !k.is_empty())
                .collect();
            if keywords.is_empty() {
                return Err(err("no keywords"));
            }
            match categories.iter_mut().find(|(c, _)| *c == category) {
                Some((_, existing)) => existing.extend(keywords),
                None => categories.push((category, keywords)),
            }
        }
        if categories.is_empty() {
            return Err(SignalsError::EmptyTaxonomy);
        }
        for (_, keywords) in &mut categories {
            let mut seen = BTreeSet::new();
            keywords.retain(|k| seen.insert(k.clone()));
        }
        Ok(Self { categories })
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.categories.iter().map(|(c, k)| (c.as_str(), k.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalSource {
    Readme,
    Description,
    Topics,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoalEvidence {
    pub source: GoalSource,
    pub matched_term: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalTag {
    pub category: String,
    pub evidence: Vec<GoalEvidence>,
}

/// True when `keyword` (already lowercase) occurs in `lowered` with no
/// alphanumeric character immediately before or after it.
fn contains_whole_word(lowered: &str, keyword: &str) -> bool {
    if keyword.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(offset) = lowered[from..].find(keyword) {
        let start = from + offset;
        let end = start + keyword.len();
        let before = lowered[..start].chars().next_back();
        let after = lowered[end..].chars().next();
        if !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric) {
            return true;
        }
        from = start + lowered[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Goal categories with at least one whole-word keyword hit, ordered by
/// evidence count (desc) then category name.
pub fn detect_goal_tags(
    readme: &str,
    description: &str,
    topics: &[String],
    taxonomy: &GoalTaxonomy,
) -> Vec<GoalTag> {
    let readme = readme.to_lowercase();
    let description = description.to_lowercase();
    let topics: Vec<String> = topics.iter().map(|t| t.to_lowercase()).collect();
    let sources: [(GoalSource, Vec<&str>); 3] = [
        (GoalSource::Readme, vec![readme.as_str()]),
        (GoalSource::Description, vec![description.as_str()]),
        (GoalSource::Topics, topics.iter().map(String::as_str).collect()),
    ];

    let mut tags: Vec<GoalTag> = taxonomy
        .categories()
        .filter_map(|(category, keywords)| {
            let evidence: Vec<GoalEvidence> = sources
                .iter()
                .flat_map(|(source, texts)| {
                    keywords
                        .iter()
                        .filter(|k| texts.iter().any(|t| contains_whole_word(t, k)))
                        .map(|k| GoalEvidence {
                            source: *source,
                            matched_term: k.clone(),
                        })
                })
                .collect();
            (!evidence.is_empty()).then(|| GoalTag {
                category: category.to_string(),
                evidence,
            })
        })
        .collect();
    tags.sort_by(|a, b| b.evidence.len().cmp(&a.evidence.len()).then(a.category.cmp(&b.category)));
    tags
}

pub fn detect_project_goals(project: &ProjectProfile, taxonomy: &GoalTaxonomy) -> Vec<GoalTag> {
    detect_goal_tags(&project.readme, &project.description, &project.topics, taxonomy)
}

/// README marker that records a goal badge as present.
pub fn badge_marker(category: &str) -> String {
    format!("<!-- community-pulse:badge:{category} -->")
}

/// Badge image URL suggested for a goal category.
pub fn badge_url(category: &str) -> String {
    format!("https://img.shields.io/badge/social_good-{category}-brightgreen")
}

/// Markdown snippet a maintainer can paste into the README.
pub fn badge_markdown(category: &str) -> String {
    format!("{}\n![social good: {category}]({})", badge_marker(category), badge_url(category))
}

/// Whether the README already carries the badge marker or image URL for `category`.
pub fn has_goal_badge(readme: &str, category: &str) -> bool {
    let lowered = readme.to_lowercase();
    lowered.contains(&badge_marker(category)) || lowered.contains(&badge_url(category).to_lowercase())
}
