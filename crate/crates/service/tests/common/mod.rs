#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ragdesk::config::AppConfig;
use ragdesk_core::ingest::{schema, ExportKind, RemoteExport};
use serde_json::{json, Value};
use tempfile::TempDir;

pub const SCRIPT: &str = r#"{
  "rules": [
    {"match": "Reply with exactly one line", "response": "Question: {{query}}"},
    {"match": "You extract evidence", "response": "{{context:1}}"},
    {"match": "Base your answer only", "response": "From the docs: {{context_first_line:1}}"}
  ],
  "default": "unscripted prompt"
}"#;

pub const GROUND_TRUTH: &str = concat!(
    r#"{"id":"q1","question":"How do I reset my VPN token?","reference_answer":"Open the self-service portal and choose reset token.","supporting_item_ids":["m1:0"]}"#,
    "\n",
    r#"{"id":"q2","question":"Which Java version does the build agent need?","reference_answer":"The build agent needs Java 17.","supporting_item_ids":["p1:0"]}"#,
    "\n",
    r#"{"id":"q3","question":"Why is the staging database read only?","reference_answer":"Staging is read only during the nightly snapshot.","supporting_item_ids":["m2:0"]}"#,
    "\n"
);

fn table(kind: ExportKind, rows: Vec<Value>, columns: &[&str]) -> Vec<u8> {
    RemoteExport {
        kind,
        items: rows,
        requests: 1,
    }
    .to_csv_bytes(columns)
}

fn message(id: &str, minute: u32, content: &str) -> Value {
    json!({
        "id": id,
        "messageType": "message",
        "createdDateTime": format!("2024-03-01T09:{minute:02}:00Z"),
        "content": content,
        "userDisplayName": "Dana Smith",
        "userId": "u-1",
        "channelIdentity.channelId": "c-ops",
        "contentType": "html",
    })
}

fn reply(id: &str, parent: &str, minute: u32, content: &str) -> Value {
    json!({
        "id": id,
        "replyToId": parent,
        "messageType": "message",
        "createdDateTime": format!("2024-03-01T10:{minute:02}:00Z"),
        "content": content,
        "userDisplayName": "Lee Park",
        "userId": "u-2",
        "contentType": "html",
    })
}

/// A temporary deployment: exports, scripted model, ground truth and a
/// config file pointing at them.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self::with_config_extra("")
    }

    /// `extra` is appended to the generated config file.
    pub fn with_config_extra(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("exports")).unwrap();

        let messages = vec![
            message(
                "m1",
                1,
                "<p>How do I reset my VPN token? It keeps expiring.</p>",
            ),
            message(
                "m2",
                2,
                "<p>Why is the staging database read only this morning?</p>",
            ),
            message(
                "m3",
                3,
                "<p>Anyone know the on-call rota for the payments team?</p>",
            ),
        ];
        let replies = vec![
            reply(
                "r1",
                "m1",
                1,
                "<p>Open the self-service portal and choose reset token.</p>",
            ),
            reply(
                "r2",
                "m2",
                2,
                "<p>Staging is read only during the nightly snapshot, it comes back at 08:00.</p>",
            ),
            reply(
                "r3",
                "m3",
                3,
                "<p>The rota lives in the payments wiki space.</p>",
            ),
        ];
        fs::write(
            root.join("exports/messages.csv"),
            table(ExportKind::Messages, messages, &schema::MESSAGE_COLUMNS),
        )
        .unwrap();
        fs::write(
            root.join("exports/replies.csv"),
            table(ExportKind::Replies, replies, &schema::REPLY_COLUMNS),
        )
        .unwrap();
        let pages = json!([
            {"id": "p1", "title": "Build agent setup", "html": "<h1>Build agents</h1><p>The build agent needs Java 17 and Docker 24.</p>"},
            {"id": "p2", "title": "Release checklist", "html": "<p>Tag the release, update the changelog and notify the release channel.</p>"}
        ]);
        fs::write(
            root.join("exports/pages.json"),
            serde_json::to_vec(&pages).unwrap(),
        )
        .unwrap();
        fs::write(root.join("script.json"), SCRIPT).unwrap();
        fs::write(root.join("ground_truth.jsonl"), GROUND_TRUTH).unwrap();

        let config = format!(
            r#"store_dir = "store"
documents_path = "documents.jsonl"
default_retriever = "bm25"

[ingest]
messages_csv = "exports/messages.csv"
replies_csv = "exports/replies.csv"
pages = "exports/pages.json"

[retrieval]
k = 2
similarity_threshold = 0.0

[embedder]
kind = "hashing"
dimension = 64

[llm]
backend = "scripted"
script = "script.json"

[eval]
ground_truth = "ground_truth.jsonl"
output_dir = "reports"
iterations = 2
{extra}"#
        );
        fs::write(root.join("ragdesk.toml"), config).unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.path().join("ragdesk.toml")
    }

    pub fn config(&self) -> AppConfig {
        AppConfig::load(&self.config_path()).unwrap()
    }

    /// Runs the CLI with `--config` pointing at this workspace.
    pub fn cli(&self, args: &[&str]) -> (i32, String, String) {
        self.cli_with_input(args, "")
    }

    pub fn cli_with_input(&self, args: &[&str], input: &str) -> (i32, String, String) {
        let config = self.config_path().display().to_string();
        let mut argv = vec!["ragdesk", "--config", config.as_str()];
        argv.extend_from_slice(args);
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = ragdesk::cli::run(argv, &mut input.as_bytes(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    /// `ingest` followed by `index`.
    pub fn build(&self) {
        let (code, _, err) = self.cli(&["ingest"]);
        assert_eq!(code, 0, "{err}");
        let (code, _, err) = self.cli(&["index"]);
        assert_eq!(code, 0, "{err}");
    }
}
