use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::html::strip_html;
use super::pii::{scrub_pii, PiiRoster};
use super::tables::{RawTeamsMessage, RawTeamsReply};

pub const MESSAGE_PREFIX: &str = "Message:";
pub const RESPONSES_PREFIX: &str = "This message has the following responses:";

/// A chat message with its replies, cleaned and in posting order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadDocument {
    pub source_id: String,
    pub channel_id: String,
    pub message: String,
    pub replies: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Reconciled {
    pub threads: Vec<ThreadDocument>,
    /// Ids of replies whose parent is not among the messages.
    pub orphans: Vec<String>,
}

fn clean(html: &str, roster: &PiiRoster) -> String {
    scrub_pii(&strip_html(html), roster)
}

/// Attaches replies to their parent messages.
///
/// Threads come out in message input order; replies within a thread are
/// sorted by creation time (stable, so equal timestamps keep export order).
/// Unmatched replies are reported in `orphans`, never dropped silently.
pub fn reconcile_threads(
    messages: &[RawTeamsMessage],
    replies: &[RawTeamsReply],
    roster: &PiiRoster,
) -> Reconciled {
    let index: HashMap<&str, usize> = messages
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();
    let mut attached: Vec<Vec<&RawTeamsReply>> = vec![Vec::new(); messages.len()];
    let mut orphans = Vec::new();
    for reply in replies {
        match index.get(reply.parent_id.as_str()) {
            Some(&i) => attached[i].push(reply),
            None => orphans.push(reply.id.clone()),
        }
    }

    let threads = messages
        .iter()
        .zip(attached)
        .map(|(m, mut rs)| {
            rs.sort_by_key(|r| r.created);
            ThreadDocument {
                source_id: m.id.clone(),
                channel_id: m.channel_id.clone(),
                message: clean(&m.content, roster),
                replies: rs.iter().map(|r| clean(&r.content, roster)).collect(),
            }
        })
        .collect();
    Reconciled { threads, orphans }
}

/// Renders a thread as the plain-text document that gets indexed.
///
/// ```text
/// Message: <message>
/// This message has the following responses:
/// <reply 1>
/// <reply 2>
/// ```
///
/// The responses line is omitted when there are no replies.
pub fn render_thread(thread: &ThreadDocument) -> String {
    let mut out = format!("{MESSAGE_PREFIX} {}", thread.message);
    if !thread.replies.is_empty() {
        out.push('\n');
        out.push_str(RESPONSES_PREFIX);
        for reply in &thread.replies {
            out.push('\n');
            out.push_str(reply);
        }
    }
    out
}
