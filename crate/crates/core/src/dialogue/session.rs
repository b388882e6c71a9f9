use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const DEFAULT_HISTORY_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    /// Empty for user turns.
    #[serde(default)]
    pub trace_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    turns: Vec<ChatTurn>,
    /// Prior exchanges (user turn plus reply) shown to the rewriter.
    pub history_window: usize,
}

impl ChatSession {
    pub fn new(id: impl Into<String>) -> Self {
        Self::with_window(id, DEFAULT_HISTORY_WINDOW)
    }

    pub fn with_window(id: impl Into<String>, history_window: usize) -> Self {
        Self {
            id: id.into(),
            turns: Vec::new(),
            history_window,
        }
    }

    pub fn turns(&self) -> &[ChatTurn] {
        &self.turns
    }

    /// Number of user turns so far.
    pub fn exchange_count(&self) -> usize {
        self.turns.iter().filter(|t| t.role == Role::User).count()
    }

    /// The last `history_window` exchanges.
    pub fn history(&self) -> &[ChatTurn] {
        if self.history_window == 0 {
            return &[];
        }
        let user_starts: Vec<usize> = self
            .turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.role == Role::User)
            .map(|(i, _)| i)
            .collect();
        let from = match user_starts.len().checked_sub(self.history_window) {
            Some(skip) => user_starts[skip],
            None => 0,
        };
        &self.turns[from..]
    }

    pub fn push(
        &mut self,
        role: Role,
        text: impl Into<String>,
        trace_id: impl Into<String>,
        at: DateTime<Utc>,
    ) {
        let at = self.turns.last().map_or(at, |t| at.max(t.timestamp));
        self.turns.push(ChatTurn {
            role,
            text: text.into(),
            timestamp: at,
            trace_id: trace_id.into(),
        });
    }
}
