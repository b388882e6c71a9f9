use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::html::strip_html;
use super::pii::{scrub_pii, PiiRoster};

pub const PAGE_TITLE_PREFIX: &str = "Page Title:";
pub const PAGE_CONTENT_PREFIX: &str = "The content of this page is as follows:";

/// A wiki page reduced to title and plain-text body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDocument {
    pub source_id: String,
    pub title: String,
    pub body: String,
}

/// One entry of a JSON page export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPage {
    pub id: String,
    pub title: String,
    pub html: String,
}

#[derive(Debug, Error)]
pub enum PageError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("page export is not a JSON array of pages: {0}")]
    Json(#[from] serde_json::Error),
    #[error("page `{0}` has an empty title")]
    EmptyTitle(String),
}

/// Renders a page as the plain-text document that gets chunked.
pub fn render_page(page: &PageDocument) -> String {
    format!(
        "{PAGE_TITLE_PREFIX} {}\n{PAGE_CONTENT_PREFIX}\n{}",
        page.title, page.body
    )
}

/// Title of a rendered page, read back from its first line.
pub fn rendered_title(rendered: &str) -> Option<&str> {
    rendered
        .lines()
        .next()?
        .strip_prefix(PAGE_TITLE_PREFIX)
        .map(|t| t.strip_prefix(' ').unwrap_or(t))
}

/// Cleans a raw page. The title is scrubbed too: wiki titles regularly carry
/// owner names.
pub fn clean_page(raw: &RawPage, roster: &PiiRoster) -> Result<PageDocument, PageError> {
    let title = scrub_pii(&strip_html(&raw.title), roster);
    if title.is_empty() {
        return Err(PageError::EmptyTitle(raw.id.clone()));
    }
    Ok(PageDocument {
        source_id: raw.id.clone(),
        title,
        body: scrub_pii(&strip_html(&raw.html), roster),
    })
}

/// Parses a JSON array export: `[{"id":…, "title":…, "html":…}]`.
pub fn parse_pages_json(bytes: &[u8]) -> Result<Vec<RawPage>, PageError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Reads every `.html`/`.htm` file in `dir` (sorted by file name). The id is
/// the file stem; the title comes from `<title>`, else the first `<h1>`, else
/// the file stem.
pub fn read_pages_dir(dir: &Path) -> Result<Vec<RawPage>, PageError> {
    let io = |e: std::io::Error| PageError::Io {
        path: dir.display().to_string(),
        source: e,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let html = fs::read_to_string(&path).map_err(|e| PageError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let title = element_text(&html, "title")
                .or_else(|| element_text(&html, "h1"))
                .unwrap_or_else(|| id.clone());
            Ok(RawPage { id, title, html })
        })
        .collect()
}

fn element_text(html: &str, tag: &str) -> Option<String> {
    let lower = html.to_ascii_lowercase();
    let open = lower.find(&format!("<{tag}"))?;
    let start = open + lower[open..].find('>')? + 1;
    let end = start + lower[start..].find(&format!("</{tag}"))?;
    let text = strip_html(&html[start..end]);
    (!text.is_empty()).then_some(text)
}
