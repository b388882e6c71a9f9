//! CSV parsing of the messages and replies exports.

use std::collections::HashSet;

use chrono::{DateTime, FixedOffset};
use thiserror::Error;

use super::schema::{self, MESSAGE_COLUMNS, MESSAGE_REQUIRED, REPLY_COLUMNS, REPLY_REQUIRED};

/// Fatal problems with an export table as a whole.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("unreadable header: {0}")]
    Header(String),
}

/// A problem with one data row. Parsing continues past these.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RowError {
    #[error("row {row}: {reason}")]
    Malformed { row: u64, reason: String },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: u64, id: String },
}

impl RowError {
    pub fn row(&self) -> u64 {
        match self {
            RowError::Malformed { row, .. } | RowError::DuplicateId { row, .. } => *row,
        }
    }
}

/// Export columns that have no dedicated field, in header order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtraColumns(Vec<(String, String)>);

impl ExtraColumns {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(c, _)| c == column)
            .map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(c, v)| (c.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTeamsMessage {
    pub id: String,
    pub created: DateTime<FixedOffset>,
    /// Message body as exported (HTML).
    pub content: String,
    pub sender_name: String,
    pub sender_id: String,
    pub channel_id: String,
    pub extras: ExtraColumns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTeamsReply {
    pub id: String,
    pub parent_id: String,
    pub created: DateTime<FixedOffset>,
    pub content: String,
    pub sender_name: String,
    pub sender_id: String,
    pub extras: ExtraColumns,
}

/// Result of parsing one export table.
#[derive(Debug, Clone)]
pub struct ParsedTable<R> {
    pub records: Vec<R>,
    pub row_errors: Vec<RowError>,
    /// Header is exactly the full export column list.
    pub conforming: bool,
    pub header: Vec<String>,
}

struct Columns {
    header: Vec<String>,
    required: Vec<usize>,
    extra: Vec<usize>,
}

impl Columns {
    fn resolve(header: Vec<String>, required: &[&str]) -> Result<Self, TableError> {
        let mut idx = Vec::with_capacity(required.len());
        for name in required {
            match header.iter().position(|h| h == name) {
                Some(i) => idx.push(i),
                None => return Err(TableError::MissingColumn((*name).to_string())),
            }
        }
        let extra = (0..header.len()).filter(|i| !idx.contains(i)).collect();
        Ok(Self {
            header,
            required: idx,
            extra,
        })
    }

    fn extras(&self, record: &csv::StringRecord) -> ExtraColumns {
        ExtraColumns(
            self.extra
                .iter()
                .map(|&i| {
                    (
                        self.header[i].clone(),
                        record.get(i).unwrap_or("").to_string(),
                    )
                })
                .collect(),
        )
    }
}

fn parse_timestamp(raw: &str) -> Result<DateTime<FixedOffset>, String> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map_err(|e| format!("invalid {} `{raw}`: {e}", schema::COL_CREATED))
}

/// Walks the data rows, handing each one to `build` together with the
/// required-column values (in `required` order).
fn parse_table<R>(
    bytes: &[u8],
    required: &[&str],
    conforming_layout: &[&str],
    id_of: impl Fn(&R) -> &str,
    build: impl Fn(&[&str], ExtraColumns) -> Result<R, String>,
) -> Result<ParsedTable<R>, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| TableError::Header(e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    let columns = Columns::resolve(header, required)?;
    let conforming = schema::header_matches(&columns.header, conforming_layout);

    let mut records = Vec::new();
    let mut row_errors = Vec::new();
    let mut seen = HashSet::new();
    for (n, result) in reader.records().enumerate() {
        // header is line 1
        let fallback_row = n as u64 + 2;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map(|p| p.line()).unwrap_or(fallback_row);
                row_errors.push(RowError::Malformed {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let row = record.position().map(|p| p.line()).unwrap_or(fallback_row);
        let values: Vec<&str> = columns
            .required
            .iter()
            .map(|&i| record.get(i).unwrap_or(""))
            .collect();
        match build(&values, columns.extras(&record)) {
            Ok(rec) => {
                if seen.insert(id_of(&rec).to_string()) {
                    records.push(rec);
                } else {
                    row_errors.push(RowError::DuplicateId {
                        row,
                        id: id_of(&rec).to_string(),
                    });
                }
            }
            Err(reason) => row_errors.push(RowError::Malformed { row, reason }),
        }
    }
    Ok(ParsedTable {
        records,
        row_errors,
        conforming,
        header: columns.header,
    })
}

fn non_empty<'a>(value: &'a str, column: &str) -> Result<&'a str, String> {
    if value.trim().is_empty() {
        Err(format!("empty `{column}`"))
    } else {
        Ok(value)
    }
}

/// Parses a messages export (CSV with header row).
pub fn parse_messages_table(bytes: &[u8]) -> Result<ParsedTable<RawTeamsMessage>, TableError> {
    parse_table(
        bytes,
        &MESSAGE_REQUIRED,
        &MESSAGE_COLUMNS,
        |m: &RawTeamsMessage| &m.id,
        |v, extras| {
            Ok(RawTeamsMessage {
                id: non_empty(v[0], schema::COL_ID)?.trim().to_string(),
                created: parse_timestamp(v[1])?,
                content: v[2].to_string(),
                sender_name: v[3].to_string(),
                sender_id: v[4].to_string(),
                channel_id: v[5].to_string(),
                extras,
            })
        },
    )
}

/// Parses a replies export. `replyToId` becomes the reply's parent id.
pub fn parse_replies_table(bytes: &[u8]) -> Result<ParsedTable<RawTeamsReply>, TableError> {
    parse_table(
        bytes,
        &REPLY_REQUIRED,
        &REPLY_COLUMNS,
        |r: &RawTeamsReply| &r.id,
        |v, extras| {
            Ok(RawTeamsReply {
                id: non_empty(v[0], schema::COL_ID)?.trim().to_string(),
                parent_id: non_empty(v[1], schema::COL_PARENT)?.trim().to_string(),
                created: parse_timestamp(v[2])?,
                content: v[3].to_string(),
                sender_name: v[4].to_string(),
                sender_id: v[5].to_string(),
                extras,
            })
        },
    )
}
