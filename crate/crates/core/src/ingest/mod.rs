//! Chat and wiki ingestion: export parsing, cleaning, reconciliation and
//! rendering into prefixed plain-text documents.

mod html;
mod pages;
mod pii;
pub mod remote;
pub mod schema;
mod tables;
mod threads;

use serde::{Deserialize, Serialize};

pub use html::strip_html;
pub use pages::{
    clean_page, parse_pages_json, read_pages_dir, render_page, rendered_title, PageDocument,
    PageError, RawPage, PAGE_CONTENT_PREFIX, PAGE_TITLE_PREFIX,
};
pub use pii::{scrub_pii, PiiRoster, RosterFile, EMAIL_PLACEHOLDER};
pub use remote::{fetch_remote, ExportKind, FetchError, RemoteExport, RemoteSource};
pub use tables::{
    parse_messages_table, parse_replies_table, ExtraColumns, ParsedTable, RawTeamsMessage,
    RawTeamsReply, RowError, TableError,
};
pub use threads::{
    reconcile_threads, render_thread, Reconciled, ThreadDocument, MESSAGE_PREFIX, RESPONSES_PREFIX,
};

use crate::corpus::SourceKind;

/// A rendered document ready for chunking, as written to `documents.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedDocument {
    pub source_id: String,
    pub kind: SourceKind,
    /// Page title; empty for threads.
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl RenderedDocument {
    pub fn from_thread(thread: &ThreadDocument) -> Self {
        Self {
            source_id: thread.source_id.clone(),
            kind: SourceKind::Teams,
            title: String::new(),
            text: render_thread(thread),
        }
    }

    pub fn from_page(page: &PageDocument) -> Self {
        Self {
            source_id: page.source_id.clone(),
            kind: SourceKind::Confluence,
            title: page.title.clone(),
            text: render_page(page),
        }
    }
}
