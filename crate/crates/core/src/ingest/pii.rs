//! Roster-driven removal of personal data.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const EMAIL_PLACEHOLDER: &str = "[EMAIL]";

fn email_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}")
            .expect("email pattern")
    })
}

/// On-disk form of a roster: `{"names": [...], "emails": [...], "placeholders": {...}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RosterFile {
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub emails: Vec<String>,
    /// Optional fixed tokens for some names.
    #[serde(default)]
    pub placeholders: BTreeMap<String, String>,
}

/// Known people and addresses to remove from text.
///
/// Names without an explicit placeholder get `[PERSON_n]`, numbered in sorted
/// name order, so the same roster always yields the same tokens.
#[derive(Debug, Clone)]
pub struct PiiRoster {
    names: BTreeSet<String>,
    emails: BTreeSet<String>,
    placeholders: BTreeMap<String, String>,
    name_pattern: Option<Regex>,
    email_literals: Option<Regex>,
}

impl Default for PiiRoster {
    fn default() -> Self {
        Self::new(Vec::<String>::new(), Vec::<String>::new())
    }
}

impl PiiRoster {
    pub fn new<N, E>(names: N, emails: E) -> Self
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator,
        E::Item: Into<String>,
    {
        Self::with_placeholders(names, emails, BTreeMap::new())
    }

    pub fn with_placeholders<N, E>(names: N, emails: E, fixed: BTreeMap<String, String>) -> Self
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator,
        E::Item: Into<String>,
    {
        let mut names: BTreeSet<String> = names
            .into_iter()
            .map(Into::into)
            .map(|n: String| n.trim().to_string())
            .filter(|n| !n.is_empty())
            .collect();
        names.extend(fixed.keys().cloned());
        let emails: BTreeSet<String> = emails
            .into_iter()
            .map(Into::into)
            .map(|e: String| e.trim().to_string())
            .filter(|e| !e.is_empty())
            .collect();

        let mut placeholders = BTreeMap::new();
        let mut next = 1;
        for name in &names {
            let token = match fixed.get(name) {
                Some(t) => t.clone(),
                None => {
                    let t = format!("[PERSON_{next}]");
                    next += 1;
                    t
                }
            };
            placeholders.insert(name.to_lowercase(), token);
        }

        Self {
            name_pattern: alternation(&names, true),
            email_literals: alternation(&emails, false),
            names,
            emails,
            placeholders,
        }
    }

    pub fn from_file(file: RosterFile) -> Self {
        Self::with_placeholders(file.names, file.emails, file.placeholders)
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.names
    }

    pub fn emails(&self) -> &BTreeSet<String> {
        &self.emails
    }

    pub fn placeholder(&self, name: &str) -> Option<&str> {
        self.placeholders
            .get(&name.trim().to_lowercase())
            .map(String::as_str)
    }
}

/// Case-insensitive alternation, longest literal first so "Jane Doe" wins
/// over "Jane".
fn alternation(literals: &BTreeSet<String>, word_bounded: bool) -> Option<Regex> {
    if literals.is_empty() {
        return None;
    }
    let mut sorted: Vec<&String> = literals.iter().collect();
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let body = sorted
        .iter()
        .map(|l| regex::escape(l))
        .collect::<Vec<_>>()
        .join("|");
    let pattern = if word_bounded {
        format!(r"(?i)(?:^|\b)(?:{body})(?:\b|$)")
    } else {
        format!(r"(?i)(?:{body})")
    };
    Some(Regex::new(&pattern).expect("escaped literals"))
}

/// Replaces roster emails and any email-shaped token with `[EMAIL]`, and
/// roster names with their placeholders. Other text is left untouched.
pub fn scrub_pii(text: &str, roster: &PiiRoster) -> String {
    let mut out = match &roster.email_literals {
        Some(re) => re.replace_all(text, EMAIL_PLACEHOLDER).into_owned(),
        None => text.to_string(),
    };
    out = email_pattern()
        .replace_all(&out, EMAIL_PLACEHOLDER)
        .into_owned();
    if let Some(re) = &roster.name_pattern {
        out = re
            .replace_all(&out, |caps: &regex::Captures<'_>| {
                let found = caps[0].to_lowercase();
                roster
                    .placeholders
                    .get(&found)
                    .cloned()
                    .unwrap_or_else(|| caps[0].to_string())
            })
            .into_owned();
    }
    out
}
