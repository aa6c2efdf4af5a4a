//! Experimental analysis: main-table selection, record extraction with
//! citation-year joins, temporal alignment, and line-chart rendering.

mod align;
mod chart;

use std::collections::BTreeMap;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatRequest};
use crate::docparse::Table;
use crate::mmap::{fenced_block, AgentSettings, SYSTEM_PROMPT};
use crate::pipeline::ExtractedDocument;
use crate::repair::{complete_with_repair, RepairError};

pub use align::{align_chain, AlignStats, ExperimentChain, Provenance, TrendPoint, TrendSeries, DEFAULT_DATASET};
pub use chart::{build_chart_spec, render_linechart, Axis, ChartPoint, ChartSeries, ChartSpec};

/// Header keywords that mark a results table.
pub const METRIC_KEYWORDS: &[&str] = &["accuracy", "f1", "bleu", "meteor", "psnr", "ssim", "fid", "pass@1", "top-1", "map"];
const KEYWORD_BONUS: usize = 10;

static LOWER_BETTER: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    include_str!("../../data/directions.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});
static CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+)\]").unwrap());

#[derive(Debug, thiserror::Error)]
pub enum LchartError {
    #[error("document {0} has no tables")]
    NoTable(String),
    #[error("extraction for {doc_id} failed after {attempts} attempt(s): {}", .violations.join("; "))]
    ExtractionFailed {
        doc_id: String,
        attempts: u32,
        violations: Vec<String>,
    },
    #[error("no observations to chart")]
    EmptyChain,
    #[error("invalid value reached the renderer: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Keyword default: fid/lpips/kid/cmmd are lower-better, all else higher-better.
    pub fn infer(metric: &str) -> Self {
        let m = metric.to_lowercase();
        if LOWER_BETTER.iter().any(|k| m.contains(k)) {
            Direction::LowerBetter
        } else {
            Direction::HigherBetter
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        }
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherBetter => a > b,
            Direction::LowerBetter => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellSource {
    pub doc_id: String,
    pub table: usize,
    pub row: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricObservation {
    pub model: String,
    pub metric: String,
    pub dataset: Option<String>,
    pub value: f64,
    pub direction: Direction,
    pub source: CellSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub doc_id: String,
    pub published_at: NaiveDate,
    pub table: Table,
    pub models: Vec<String>,
    pub observations: Vec<MetricObservation>,
    pub baseline_years: BTreeMap<String, i32>,
    pub notes: Vec<String>,
    pub repair_count: u32,
}

/// Numeric-cell count plus a bonus when any header names a known metric.
pub fn table_score(table: &Table) -> usize {
    let keyword = table
        .headers
        .iter()
        .any(|h| {
            let h = h.to_lowercase();
            METRIC_KEYWORDS.iter().any(|k| h.contains(k))
        });
    table.numeric_cell_count() + if keyword { KEYWORD_BONUS } else { 0 }
}

/// Highest-scoring table; ties go to the earliest.
pub fn select_main_table(xdoc: &ExtractedDocument) -> Result<&Table, LchartError> {
    let mut best: Option<(&Table, usize)> = None;
    for t in &xdoc.tables {
        let s = table_score(t);
        if best.is_none_or(|(b, bs)| s > bs || (s == bs && t.ordinal < b.ordinal)) {
            best = Some((t, s));
        }
    }
    best.map(|(t, _)| t).ok_or_else(|| LchartError::NoTable(xdoc.doc_id.clone()))
}

pub fn build_prompt(template: &str, xdoc: &ExtractedDocument, table: &Table) -> String {
    let references: Vec<String> = xdoc.references.iter().map(|r| format!("[{}] {}", r.index, r.raw)).collect();
    template
        .replace("{{title}}", &xdoc.title)
        .replace("{{table}}", table.to_markdown().trim_end())
        .replace("{{references}}", &references.join("\n"))
}

pub fn record_request(xdoc: &ExtractedDocument, table: &Table, settings: &AgentSettings) -> ChatRequest {
    settings.request(SYSTEM_PROMPT, build_prompt(&settings.template, xdoc, table))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordReply {
    models: Vec<ModelReply>,
    observations: Vec<ObservationReply>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelReply {
    name: String,
    #[serde(default)]
    row: Option<usize>,
    #[serde(default)]
    citation: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationReply {
    model: String,
    row: usize,
    column: usize,
    #[serde(default)]
    metric: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    direction: Option<String>,
}

fn clean_header(h: &str) -> String {
    h.replace(['↑', '↓'], "").trim().to_string()
}

fn header_direction(h: &str) -> Option<Direction> {
    if h.contains('↓') {
        Some(Direction::LowerBetter)
    } else if h.contains('↑') {
        Some(Direction::HigherBetter)
    } else {
        None
    }
}

/// Models, observations, baseline years by model, and notes.
type ParsedRecord = (Vec<String>, Vec<MetricObservation>, BTreeMap<String, i32>, Vec<String>);

/// Parse and validate a reply against `table` and the reference list.
fn parse_record_reply(
    reply: &str,
    xdoc: &ExtractedDocument,
    table: &Table,
) -> Result<ParsedRecord, Vec<String>> {
    let block = fenced_block(reply, "json").ok_or_else(|| vec!["reply has no fenced ```json block".to_string()])?;
    let parsed: RecordReply =
        serde_json::from_str(block).map_err(|e| vec![format!("record JSON does not match the schema: {e}")])?;

    let mut violations = Vec::new();
    let mut notes = Vec::new();
    if parsed.models.is_empty() {
        violations.push("no models listed".to_string());
    }
    let mut models: Vec<String> = Vec::new();
    for m in &parsed.models {
        let name = m.name.trim();
        if name.is_empty() {
            violations.push("model with empty name".into());
        } else if models.iter().any(|x| x == name) {
            violations.push(format!("model {name} listed twice"));
        } else {
            models.push(name.to_string());
        }
        if let Some(r) = m.row {
            if r >= table.rows.len() {
                violations.push(format!("model {name}: row {r} out of range"));
            }
        }
        if let Some(c) = m.citation {
            if !xdoc.references.iter().any(|e| e.index == c) {
                violations.push(format!("model {name}: citation [{c}] is not in the reference list"));
            }
        }
    }

    let mut observations = Vec::new();
    for o in &parsed.observations {
        let model = o.model.trim();
        if !models.iter().any(|m| m == model) {
            violations.push(format!("observation refers to unknown model {model}"));
            continue;
        }
        let Some(cell) = table.cell(o.row, o.column) else {
            violations.push(format!("observation ({}, {}) is outside the table", o.row, o.column));
            continue;
        };
        let header = table.headers.get(o.column).map(String::as_str).unwrap_or("");
        let direction = match o.direction.as_deref().map(str::to_lowercase).as_deref() {
            Some("higher") => Some(Direction::HigherBetter),
            Some("lower") => Some(Direction::LowerBetter),
            None => None,
            Some(other) => {
                violations.push(format!("direction {other:?} is neither \"higher\" nor \"lower\""));
                continue;
            }
        };
        let metric = o
            .metric
            .as_deref()
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(clean_header)
            .unwrap_or_else(|| clean_header(header));
        if metric.is_empty() {
            violations.push(format!("observation ({}, {}) has no metric name", o.row, o.column));
            continue;
        }
        let Some(value) = cell.value else {
            notes.push(format!("cell ({}, {}) {:?} is not numeric; no observation", o.row, o.column, cell.raw));
            continue;
        };
        let direction = direction
            .or_else(|| header_direction(header))
            .unwrap_or_else(|| Direction::infer(&metric));
        observations.push(MetricObservation {
            model: model.to_string(),
            metric,
            dataset: o.dataset.as_deref().map(str::trim).filter(|d| !d.is_empty()).map(str::to_string),
            value,
            direction,
            source: CellSource {
                doc_id: xdoc.doc_id.clone(),
                table: table.ordinal,
                row: o.row,
                column: o.column,
            },
        });
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    let mut baseline_years = BTreeMap::new();
    for m in &parsed.models {
        let name = m.name.trim().to_string();
        let citation = m.citation.or_else(|| {
            let label = table.cell(m.row?, 0)?;
            CITATION.captures(&label.raw)?.get(1)?.as_str().parse().ok()
        });
        let Some(index) = citation else { continue };
        match xdoc.references.iter().find(|e| e.index == index) {
            Some(entry) => match entry.year {
                Some(year) => {
                    baseline_years.insert(name, year);
                }
                None => notes.push(format!("reference [{index}] for {name} has no resolvable year")),
            },
            None => notes.push(format!("row citation [{index}] for {name} is not in the reference list")),
        }
    }
    Ok((models, observations, baseline_years, notes))
}

/// Extract the experiment record of `xdoc` from `table`, repairing malformed replies.
pub fn extract_record(
    xdoc: &ExtractedDocument,
    table: &Table,
    backend: &dyn Backend,
    settings: &AgentSettings,
) -> Result<ExperimentRecord, LchartError> {
    let request = record_request(xdoc, table, settings);
    let outcome = complete_with_repair(backend, request, settings.repair_limit, |reply| {
        parse_record_reply(reply, xdoc, table)
    })
    .map_err(|e| match e {
        RepairError::Exhausted { attempts, violations } => LchartError::ExtractionFailed {
            doc_id: xdoc.doc_id.clone(),
            attempts,
            violations,
        },
        RepairError::Backend(b) => LchartError::Backend(b),
    })?;
    let (models, observations, baseline_years, notes) = outcome.value;
    Ok(ExperimentRecord {
        doc_id: xdoc.doc_id.clone(),
        published_at: xdoc.published_at,
        table: table.clone(),
        models,
        observations,
        baseline_years,
        notes,
        repair_count: outcome.repair_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ReplayBackend, Transcript};
    use crate::corpus::ReferenceEntry;
    use crate::docparse::extract_tables;

    pub(crate) fn xdoc(tables_md: &str, refs: &[(u32, &str)]) -> ExtractedDocument {
        ExtractedDocument {
            doc_id: "d1".into(),
            title: "Host paper".into(),
            abstract_text: "abstract".into(),
            introduction: String::new(),
            tables: extract_tables("d1", tables_md).tables,
            references: refs.iter().map(|(i, r)| ReferenceEntry::new(*i, *r)).collect(),
            published_at: NaiveDate::from_ymd_opt(2018, 5, 1).unwrap(),
            no_tables: false,
        }
    }

    #[test]
    fn main_table_by_score() {
        let md = "| a | b |\n|---|---|\n| 1 | 2 |\n\n| Model | Accuracy | x |\n|---|---|---|\n| m | 1 | 2 |\n| n | 3 | 4 |\n\n| q | r |\n|---|---|\n| 1 | 2 |\n| 3 | 4 |\n| 5 | 6 |\n";
        let d = xdoc(md, &[]);
        assert_eq!(select_main_table(&d).unwrap().ordinal, 1);
    }

    #[test]
    fn main_table_tie_goes_to_earliest() {
        let md = "| a | b |\n|---|---|\n| 1 | 2 |\n\n| c | d |\n|---|---|\n| 3 | 4 |\n";
        assert_eq!(select_main_table(&xdoc(md, &[])).unwrap().ordinal, 0);
    }

    #[test]
    fn no_tables() {
        assert!(matches!(select_main_table(&xdoc("text only", &[])), Err(LchartError::NoTable(_))));
    }

    #[test]
    fn directions() {
        assert_eq!(Direction::infer("FID"), Direction::LowerBetter);
        assert_eq!(Direction::infer("CLIP-FID"), Direction::LowerBetter);
        assert_eq!(Direction::infer("Top-1"), Direction::HigherBetter);
        assert!(Direction::LowerBetter.better(1.0, 2.0));
    }

    const TABLE: &str = "Table 1: ImageNet\n\n| Model | Top-1 | FID↓ |\n|---|---|---|\n| ResNet [12] | 76.1 | — |\n| Ours | **78.2** | 5.1 |\n";

    fn settings() -> AgentSettings {
        AgentSettings {
            model: "m".into(),
            template: "{{title}}\n{{table}}\n{{references}}".into(),
            repair_limit: 3,
            max_tokens: 256,
        }
    }

    #[test]
    fn record_joins_citation_years_and_skips_dashes() {
        let d = xdoc(TABLE, &[(12, "K. He et al. Deep residual learning. CVPR, 2016.")]);
        let table = select_main_table(&d).unwrap().clone();
        let reply = r#"```json
{"models": [{"name": "ResNet", "row": 0}, {"name": "Ours", "row": 1, "citation": null}],
 "observations": [
   {"model": "ResNet", "row": 0, "column": 1, "dataset": "ImageNet"},
   {"model": "ResNet", "row": 0, "column": 2},
   {"model": "Ours", "row": 1, "column": 1, "dataset": "ImageNet"},
   {"model": "Ours", "row": 1, "column": 2}
 ]}
```"#;
        let mut t = Transcript::new();
        t.insert_chat(&record_request(&d, &table, &settings()), reply);
        let rec = extract_record(&d, &table, &ReplayBackend::new(t), &settings()).unwrap();
        assert_eq!(rec.baseline_years.get("ResNet"), Some(&2016));
        assert_eq!(rec.observations.len(), 3);
        assert_eq!(rec.notes.len(), 1);
        let fid = rec.observations.iter().find(|o| o.metric == "FID").unwrap();
        assert_eq!(fid.direction, Direction::LowerBetter);
        assert_eq!(fid.value, 5.1);
        assert_eq!(rec.repair_count, 0);
    }

    #[test]
    fn invalid_replies_are_violations() {
        let d = xdoc(TABLE, &[(12, "K. He. 2016.")]);
        let table = select_main_table(&d).unwrap();
        let bad = |s: &str| parse_record_reply(s, &d, table).unwrap_err();
        assert!(bad("no json").len() == 1);
        assert!(bad("```json\n{\"models\": []}\n```")[0].contains("schema"));
        let unknown = bad("```json\n{\"models\":[{\"name\":\"A\"}],\"observations\":[{\"model\":\"B\",\"row\":0,\"column\":1}]}\n```");
        assert!(unknown[0].contains("unknown model"));
        let oob = bad("```json\n{\"models\":[{\"name\":\"A\"}],\"observations\":[{\"model\":\"A\",\"row\":9,\"column\":1}]}\n```");
        assert!(oob[0].contains("outside"));
        let cite = bad("```json\n{\"models\":[{\"name\":\"A\",\"citation\":3}],\"observations\":[]}\n```");
        assert!(cite[0].contains("[3]"));
    }
}
