use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalRecord, EvalReport, EvalRun};
use crate::retrieval::RetrieverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Markdown,
        ReportFormat::Json,
        ReportFormat::Csv,
    ];

    /// File the format is written to by default.
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "report.md",
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "times.csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

pub fn render_report(report: &EvalReport, records: &[EvalRecord], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
        ReportFormat::Json => {
            let doc = EvalRun {
                report: report.clone(),
                records: records.to_vec(),
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("report is plain data");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => render_times_csv(report, records),
    }
}

/// Inverse of the JSON rendering.
pub fn parse_json_report(bytes: &[u8]) -> Result<EvalRun, serde_json::Error> {
    serde_json::from_slice(bytes)
}

fn render_markdown(report: &EvalReport) -> String {
    let kinds: Vec<RetrieverKind> = report.summaries.iter().map(|s| s.kind).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Evaluation report\n\n{} questions, {} iteration(s), k = {}, generated {}\n",
        report.entry_count,
        report.iterations,
        report.k,
        report.timestamp.to_rfc3339()
    );
    let header = |out: &mut String, first: &str| {
        let _ = writeln!(
            out,
            "| {first} | {} |",
            kinds
                .iter()
                .map(|k| k.label())
                .collect::<Vec<_>>()
                .join(" | ")
        );
        let _ = writeln!(out, "|---|{}", "---:|".repeat(kinds.len()));
    };
    header(&mut out, "Metric");
    let row = |out: &mut String, name: &str, f: &dyn Fn(&super::KindSummary) -> String| {
        let cells: Vec<String> = report.summaries.iter().map(f).collect();
        let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
    };
    row(&mut out, &format!("Recall@{}", report.k), &|s| {
        format!("{:.2}%", s.recall_at_k)
    });
    row(&mut out, "Answer Similarity", &|s| {
        format!("{:.2}%", s.mean_answer_similarity)
    });

    let _ = writeln!(out, "\n## Response time (ms)\n");
    header(&mut out, "Statistic");
    row(&mut out, "Mean", &|s| {
        format!("{:.1}", s.response_time.mean_ms)
    });
    row(&mut out, "Median", &|s| {
        format!("{:.1}", s.response_time.median_ms)
    });
    row(&mut out, "Q1", &|s| format!("{:.1}", s.response_time.q1_ms));
    row(&mut out, "Q3", &|s| format!("{:.1}", s.response_time.q3_ms));
    row(&mut out, "Failures", &|s| s.failures.to_string());
    out
}

/// One row per (entry, iteration), one response-time column per kind.
fn render_times_csv(report: &EvalReport, records: &[EvalRecord]) -> Vec<u8> {
    let kinds: Vec<RetrieverKind> = report.summaries.iter().map(|s| s.kind).collect();
    let mut rows: BTreeMap<(usize, usize), (String, BTreeMap<RetrieverKind, f64>)> =
        BTreeMap::new();
    let mut entry_order: Vec<&str> = Vec::new();
    for r in records {
        let pos = match entry_order.iter().position(|e| *e == r.entry_id) {
            Some(p) => p,
            None => {
                entry_order.push(&r.entry_id);
                entry_order.len() - 1
            }
        };
        rows.entry((r.iteration, pos))
            .or_insert_with(|| (r.entry_id.clone(), BTreeMap::new()))
            .1
            .insert(r.retriever_kind, r.response_time.as_nanos() as f64 / 1e6);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["entry_id".to_string(), "iteration".to_string()];
    header.extend(kinds.iter().map(|k| format!("{k}_ms")));
    w.write_record(&header).expect("in-memory write");
    for ((iteration, _), (entry, times)) in rows {
        let mut rec = vec![entry, iteration.to_string()];
        rec.extend(
            kinds
                .iter()
                .map(|k| times.get(k).map(|t| format!("{t:.3}")).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}
