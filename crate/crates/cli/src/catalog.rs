//! Rebuilding the newcomer label catalog from a curated list.
//!
//! Two source shapes are accepted. Markdown lists annotate projects with
//! `(label: good first issue)` or `labels: a, b`; when any such annotation is
//! present only those are read. Otherwise every non-comment line is a label.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use community_pulse_core::model::normalize_label;
use community_pulse_core::signals::LabelCatalog;

/// Written on top of every refreshed catalog. Contains no `label:` marker, so
/// a refreshed file parses back as a plain list.
pub const CATALOG_HEADER: &str = "# newcomer-friendly issue labels\n\
# one normalized label per line, sorted; regenerate with `community-pulse refresh-catalog`\n";

const TRIM: &[char] = &['_', '*', '`', '"', '\'', ' ', '\t', '(', ')', '[', ']'];

/// Start offsets just past each `label:` / `labels:` marker, case-insensitive.
fn markers(lowered: &str) -> Vec<usize> {
    let mut found = Vec::new();
    let mut from = 0;
    while let Some(pos) = lowered[from..].find("label") {
        let start = from + pos;
        let mut end = start + "label".len();
        if lowered[end..].starts_with('s') {
            end += 1;
        }
        let boundary = lowered[..start].chars().last().is_none_or(|c| !c.is_alphanumeric());
        if boundary && lowered[end..].starts_with(':') {
            found.push(end + 1);
        }
        from = start + "label".len();
    }
    found
}

/// Normalized, deduplicated, sorted labels found in `text`.
pub fn extract_labels(text: &str) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    let mut annotated = false;
    for line in text.lines() {
        // Lowercasing ASCII keeps byte offsets aligned with the original line.
        let lowered = line.to_ascii_lowercase();
        for start in markers(&lowered) {
            annotated = true;
            let rest = &line[start..];
            let end = rest.find([')', '<', '|']).unwrap_or(rest.len());
            for raw in rest[..end].split(',') {
                let label = normalize_label(raw.trim_matches(TRIM));
                if !label.is_empty() {
                    labels.insert(label);
                }
            }
        }
    }
    if annotated {
        return labels;
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.starts_with('#'))
        .map(|l| normalize_label(l.trim_start_matches(['-', '*', ' ']).trim_matches(TRIM)))
        .filter(|l| !l.is_empty())
        .collect()
}

/// Catalog file contents for `labels`.
pub fn render_catalog(labels: &BTreeSet<String>) -> String {
    let mut out = String::from(CATALOG_HEADER);
    for label in labels {
        out.push_str(label);
        out.push('\n');
    }
    out
}

/// Reads a local file or downloads an `http(s)` URL.
pub async fn read_source(source: &str) -> Result<String> {
    if source.starts_with("http://") || source.starts_with("https://") {
        let response = reqwest::get(source).await.with_context(|| format!("fetching {source}"))?;
        let status = response.status();
        if !status.is_success() {
            bail!("fetching {source}: HTTP {status}");
        }
        return response.text().await.with_context(|| format!("reading {source}"));
    }
    std::fs::read_to_string(source).with_context(|| format!("reading {source}"))
}

/// Validates the refreshed catalog and replaces `out` atomically. On any
/// error the existing file is left untouched.
pub fn write_catalog(text: &str, out: &Path) -> Result<LabelCatalog> {
    let labels = extract_labels(text);
    let rendered = render_catalog(&labels);
    let catalog = LabelCatalog::parse(&rendered).context("refreshed catalog is not usable")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let name = out.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = out.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, rendered).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, out).with_context(|| format!("replacing {}", out.display()))?;
    Ok(catalog)
}
