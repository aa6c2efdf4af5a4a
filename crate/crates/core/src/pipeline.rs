//! The plan step: classify an instruction, normalize each document of a
//! cluster, dispatch to exactly one agent, and write the run's artifacts.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatRequest, Message};
use crate::config::{Config, ConfigError};
use crate::corpus::{Corpus, Document, ReferenceEntry, SectionKind};
use crate::docparse::{extract_tables, Table};
use crate::lchart;
use crate::mmap::{self, AgentSettings};
use crate::render::Figure;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("cannot tell whether {0:?} asks for method tracking or experimental analysis")]
    AmbiguousIntent(String),
    #[error("document {0} has no usable abstract or introduction")]
    ParseFailure(String),
    #[error("cluster {0} is not in the corpus")]
    UnknownCluster(String),
    #[error("cluster {0} has no documents")]
    EmptyCluster(String),
    #[error("cluster id {0:?} cannot be used as a directory name")]
    InvalidClusterId(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    MethodTracking,
    ExperimentalAnalysis,
}

impl Intent {
    /// Directory name under `out/<cluster_id>/`.
    pub fn dir_name(self) -> &'static str {
        match self {
            Intent::MethodTracking => "method_tracking",
            Intent::ExperimentalAnalysis => "experimental_analysis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub raw: String,
    pub intent: Intent,
    pub cluster_id: String,
}

impl Instruction {
    pub fn new(raw: &str, cluster_id: &str, backend: Option<&dyn Backend>, model: &str) -> Result<Self, PipelineError> {
        Ok(Self {
            raw: raw.to_string(),
            intent: classify_intent(raw, backend, model)?,
            cluster_id: cluster_id.to_string(),
        })
    }
}

/// The normalized content of one paper that both agents consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    pub introduction: String,
    pub tables: Vec<Table>,
    pub references: Vec<ReferenceEntry>,
    pub published_at: NaiveDate,
    pub no_tables: bool,
}

const METHOD_STEMS: &[&str] = &["method", "evol", "motivat"];
const EXPERIMENT_STEMS: &[&str] = &["result", "benchmark", "metric", "experiment", "compar"];

fn keyword_hits(raw: &str) -> (usize, usize) {
    let tokens = crate::text::tokenize(raw);
    let count = |stems: &[&str]| tokens.iter().filter(|t| stems.iter().any(|s| t.starts_with(s))).count();
    (count(METHOD_STEMS), count(EXPERIMENT_STEMS))
}

fn parse_intent_reply(reply: &str) -> Option<Intent> {
    let r = reply.to_lowercase();
    match (r.contains("method_tracking"), r.contains("experimental_analysis")) {
        (true, false) => Some(Intent::MethodTracking),
        (false, true) => Some(Intent::ExperimentalAnalysis),
        _ => None,
    }
}

/// Keyword rules decide whenever one side has more hits; otherwise a
/// configured backend is asked once.
pub fn classify_intent(raw: &str, backend: Option<&dyn Backend>, model: &str) -> Result<Intent, PipelineError> {
    if raw.trim().is_empty() {
        return Err(PipelineError::EmptyInstruction);
    }
    let (method, experiment) = keyword_hits(raw);
    if method > experiment {
        return Ok(Intent::MethodTracking);
    }
    if experiment > method {
        return Ok(Intent::ExperimentalAnalysis);
    }
    let ambiguous = || PipelineError::AmbiguousIntent(raw.to_string());
    let Some(backend) = backend else { return Err(ambiguous()) };
    let request = ChatRequest::new(
        model,
        vec![
            Message::system("Classify research-analysis instructions."),
            Message::user(format!(
                "Instruction: {raw}\n\nDoes this ask to trace how methods evolved (method_tracking) or to \
                 analyse experimental results over time (experimental_analysis)? Answer with one of the two labels."
            )),
        ],
    );
    parse_intent_reply(&backend.complete(&request)?).ok_or_else(ambiguous)
}

/// Collect abstract, introduction, tables, references and date of `doc`.
pub fn extract_document(doc: &Document) -> Result<ExtractedDocument, PipelineError> {
    let body = |kind| doc.section(kind).map_or(String::new(), |s| s.body.trim().to_string());
    let abstract_text = body(SectionKind::Abstract);
    let introduction = body(SectionKind::Introduction);
    if abstract_text.is_empty() && introduction.is_empty() {
        return Err(PipelineError::ParseFailure(doc.id.clone()));
    }
    let tables = extract_tables(&doc.id, &doc.body_text()).tables;
    Ok(ExtractedDocument {
        doc_id: doc.id.clone(),
        title: doc.title.clone(),
        abstract_text,
        introduction,
        no_tables: tables.is_empty(),
        tables,
        references: doc.references.clone(),
        published_at: doc.published_at,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFailure {
    pub doc_id: String,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub extraction: Duration,
    pub assembly: Duration,
    pub render: Duration,
}

/// Summary of one run. Wall-clock timings and the network-call count are
/// kept out of `report.json` so that recorded and replayed runs write
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cluster_id: String,
    pub instruction: String,
    pub intent: Intent,
    /// Artifact paths relative to the output root.
    pub artifacts: Vec<String>,
    pub documents: usize,
    pub successes: Vec<String>,
    pub failures: Vec<DocumentFailure>,
    pub repairs: u32,
    pub render_ok: bool,
    pub render_error: Option<String>,
    #[serde(skip)]
    pub timings: Timings,
    #[serde(skip)]
    pub network_calls: usize,
}

struct Writer<'a> {
    root: &'a Path,
    rel_dir: PathBuf,
    written: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let rel = self.rel_dir.join(name);
        let path = self.root.join(&rel);
        let io = |source| PipelineError::Io { path: path.clone(), source };
        std::fs::create_dir_all(path.parent().expect("artifact path has a parent")).map_err(io)?;
        std::fs::write(&path, bytes).map_err(io)?;
        self.written.push(rel.to_string_lossy().replace('\\', "/"));
        Ok(())
    }

    fn figure(&mut self, figure: &Figure) -> Result<(), PipelineError> {
        self.write("figure.svg", figure.svg.as_bytes())?;
        self.write("figure.pgm", &figure.raster.to_pgm())
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s.into_bytes()
}

fn valid_dir_name(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0'])
}

fn thread_pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool")
}

/// Run `instruction` over its cluster and write artifacts below `out_dir`.
///
/// Per-document failures are recorded and the run continues; only a missing
/// or empty cluster and I/O errors abort.
pub fn run(
    instruction: &Instruction,
    corpus: &Corpus,
    backend: &dyn Backend,
    out_dir: &Path,
    config: &Config,
) -> Result<RunReport, PipelineError> {
    let cluster = corpus
        .cluster(&instruction.cluster_id)
        .ok_or_else(|| PipelineError::UnknownCluster(instruction.cluster_id.clone()))?;
    if !valid_dir_name(&cluster.id) {
        return Err(PipelineError::InvalidClusterId(cluster.id.clone()));
    }
    let mut docs: Vec<&Document> = corpus.cluster_documents(cluster).collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs.dedup_by(|a, b| a.id == b.id);
    if docs.is_empty() {
        return Err(PipelineError::EmptyCluster(cluster.id.clone()));
    }
    let label = if cluster.label.trim().is_empty() {
        crate::clusterer::label_cluster(&docs)
    } else {
        cluster.label.clone()
    };
    let calls_before = backend.network_calls();
    let raster = (config.raster_width as usize, config.raster_height as usize);
    let pool = thread_pool(config.parallelism);

    let mut report = RunReport {
        cluster_id: cluster.id.clone(),
        instruction: instruction.raw.clone(),
        intent: instruction.intent,
        artifacts: Vec::new(),
        documents: docs.len(),
        successes: Vec::new(),
        failures: Vec::new(),
        repairs: 0,
        render_ok: false,
        render_error: None,
        timings: Timings::default(),
        network_calls: 0,
    };
    let mut writer = Writer {
        root: out_dir,
        rel_dir: Path::new(&cluster.id).join(instruction.intent.dir_name()),
        written: Vec::new(),
    };
    let failure = |doc_id: &str, stage: &str, error: String| DocumentFailure {
        doc_id: doc_id.to_string(),
        stage: stage.to_string(),
        error,
    };

    match instruction.intent {
        Intent::MethodTracking => {
            let settings = AgentSettings::mmap(config)?;
            let started = Instant::now();
            let results: Vec<Result<mmap::MotivationMethodPair, DocumentFailure>> = pool.install(|| {
                docs.par_iter()
                    .map(|doc| {
                        let xdoc = extract_document(doc).map_err(|e| failure(&doc.id, "extract", e.to_string()))?;
                        mmap::extract_pair(&xdoc, backend, &settings).map_err(|e| failure(&doc.id, "mmap", e.to_string()))
                    })
                    .collect()
            });
            report.timings.extraction = started.elapsed();

            let started = Instant::now();
            let mut pairs = Vec::new();
            for r in results {
                match r {
                    Ok(p) => {
                        report.repairs += p.repair_count;
                        report.successes.push(p.doc_id.clone());
                        pairs.push(p);
                    }
                    Err(f) => report.failures.push(f),
                }
            }
            let chain = mmap::sort_chain(&cluster.id, &label, pairs).expect("documents are deduplicated by id");
            writer.write("chain.md", mmap::emit_chain_markdown(&chain).as_bytes())?;
            report.timings.assembly = started.elapsed();

            let started = Instant::now();
            match mmap::render_mindmap(&chain, raster) {
                Ok(fig) => {
                    writer.figure(&fig)?;
                    report.render_ok = true;
                }
                Err(e) => report.render_error = Some(e.to_string()),
            }
            report.timings.render = started.elapsed();
        }
        Intent::ExperimentalAnalysis => {
            let settings = AgentSettings::lchart(config)?;
            let started = Instant::now();
            let results: Vec<Result<lchart::ExperimentRecord, DocumentFailure>> = pool.install(|| {
                docs.par_iter()
                    .map(|doc| {
                        let xdoc = extract_document(doc).map_err(|e| failure(&doc.id, "extract", e.to_string()))?;
                        let table = lchart::select_main_table(&xdoc).map_err(|e| failure(&doc.id, "table", e.to_string()))?;
                        lchart::extract_record(&xdoc, table, backend, &settings)
                            .map_err(|e| failure(&doc.id, "lchart", e.to_string()))
                    })
                    .collect()
            });
            report.timings.extraction = started.elapsed();

            let started = Instant::now();
            let mut records = Vec::new();
            for r in results {
                match r {
                    Ok(rec) => {
                        report.repairs += rec.repair_count;
                        report.successes.push(rec.doc_id.clone());
                        records.push(rec);
                    }
                    Err(f) => report.failures.push(f),
                }
            }
            let chain = lchart::align_chain(&cluster.id, &records);
            report.timings.assembly = started.elapsed();

            let started = Instant::now();
            match chain {
                Ok(chain) => {
                    writer.write("echain.json", &json_bytes(&chain))?;
                    let rendered = lchart::build_chart_spec(&chain).and_then(|spec| lchart::render_linechart(&spec, raster));
                    match rendered {
                        Ok(fig) => {
                            writer.figure(&fig)?;
                            report.render_ok = true;
                        }
                        Err(e) => report.render_error = Some(e.to_string()),
                    }
                }
                Err(e) => report.render_error = Some(e.to_string()),
            }
            report.timings.render = started.elapsed();
        }
    }

    writer.written.push(writer.rel_dir.join("report.json").to_string_lossy().replace('\\', "/"));
    report.artifacts = writer.written.clone();
    writer.written.pop();
    report.network_calls = backend.network_calls() - calls_before;
    writer.write("report.json", &json_bytes(&report))?;
    log::info!(
        "{}: {} ok, {} failed, render_ok={}",
        report.cluster_id,
        report.successes.len(),
        report.failures.len(),
        report.render_ok
    );
    Ok(report)
}
