//! Shared fixtures: the scripted model used to record the fixture transcript,
//! plus helpers for running the pipeline and comparing output trees.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pulsechain::backend::{Backend, BackendError, RecordingBackend, ReplayBackend, Role};
use pulsechain::clusterer::embed_abstracts;
use pulsechain::corpus::{load_manifest, Corpus};
use pulsechain::pipeline::{self, Instruction, RunReport};
use pulsechain::{ChatRequest, Config, Document, EmbedRequest, Transcript};
use sha2::{Digest, Sha256};

pub const METHOD_ASK: &str = "Track how methods evolved in this cluster";
pub const EXPERIMENT_ASK: &str = "Compare benchmark results over time";
pub const CLUSTERS: &[&str] = &["c-vision", "c-solo"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn e2e_dir() -> PathBuf {
    fixtures().join("e2e")
}

pub fn transcript_path() -> PathBuf {
    e2e_dir().join("transcript.jsonl")
}

pub fn golden_dir() -> PathBuf {
    e2e_dir().join("golden")
}

pub fn corpus() -> Corpus {
    load_manifest(&e2e_dir().join("corpus.json")).expect("fixture corpus loads")
}

pub fn replay() -> ReplayBackend {
    ReplayBackend::new(Transcript::load(&transcript_path()).expect("fixture transcript loads"))
}

fn pair_reply(motivation: &str, method: &str) -> String {
    format!("```pair\nmotivation: {motivation}\nmethod: {method}\n```\n")
}

fn mmap_reply(title: &str, attempt: usize) -> String {
    match title {
        "Stacked Convolutional Baselines for Image Recognition" => pair_reply(
            "Early convolutional networks used large filters, which made deeper recognition models expensive to build.",
            "Stack uniform 3x3 convolutions into networks of up to 19 layers so that depth alone improves accuracy.",
        ),
        "Residual Shortcuts for Very Deep Networks" => pair_reply(
            "Very deep plain networks degrade: training error rises as more layers are stacked.",
            "Let each block learn a residual function added to an identity shortcut, enabling 152-layer networks.",
        ),
        // The first reply breaks the output contract so the fixture exercises repair.
        "Densely Linked Feature Reuse" if attempt == 0 => {
            "The paper is about dense connections between layers.".to_string()
        }
        "Densely Linked Feature Reuse" => pair_reply(
            "Residual networks recompute many features, leaving much of their capacity redundant.",
            "Connect every layer to all later layers in a block and reuse features by concatenation.",
        ),
        "Scaling Width, Depth and Resolution Jointly" => pair_reply(
            "Scaling backbones along a single dimension quickly stops paying off.",
            "Scale width, depth and resolution together with one compound coefficient from a searched base network.",
        ),
        "Attention-Only Sequence Transduction" => pair_reply(
            "Recurrent and convolutional encoders limit parallelism and make long-range dependencies costly.",
            "Replace recurrence and convolution with stacked self-attention layers.",
        ),
        other => panic!("no scripted pair for {other:?}"),
    }
}

fn record_reply(title: &str, attempt: usize) -> String {
    let body = match title {
        "Stacked Convolutional Baselines for Image Recognition" => {
            r#"{"models":[{"name":"ConvStack-8","row":0,"citation":2},{"name":"StackNet-19","row":1,"citation":null}],
 "observations":[
  {"model":"ConvStack-8","row":0,"column":1,"metric":"Top-1","dataset":"ImageNet","direction":"higher"},
  {"model":"ConvStack-8","row":0,"column":2,"metric":"Top-5 Error","dataset":"ImageNet","direction":"lower"},
  {"model":"StackNet-19","row":1,"column":1,"metric":"Top-1","dataset":"ImageNet","direction":"higher"},
  {"model":"StackNet-19","row":1,"column":2,"metric":"Top-5 Error","dataset":"ImageNet","direction":"lower"}]}"#
        }
        // First reply cites a reference the paper does not have.
        "Residual Shortcuts for Very Deep Networks" if attempt == 0 => {
            r#"{"models":[{"name":"StackNet-19","row":0,"citation":9}],"observations":[]}"#
        }
        "Residual Shortcuts for Very Deep Networks" => {
            r#"{"models":[{"name":"StackNet-19","row":0,"citation":4},{"name":"ResShort-50","row":1,"citation":null},{"name":"ResShort-152","row":2,"citation":null}],
 "observations":[
  {"model":"StackNet-19","row":0,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"StackNet-19","row":0,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"},
  {"model":"ResShort-50","row":1,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"ResShort-50","row":1,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"},
  {"model":"ResShort-152","row":2,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"ResShort-152","row":2,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"}]}"#
        }
        "Densely Linked Feature Reuse" => {
            r#"{"models":[{"name":"ResShort-152","row":0,"citation":7},{"name":"DenseLink-201","row":1,"citation":null}],
 "observations":[
  {"model":"ResShort-152","row":0,"column":2,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"ResShort-152","row":0,"column":3,"metric":"Top-5 Error","dataset":"ImageNet"},
  {"model":"DenseLink-201","row":1,"column":2,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"DenseLink-201","row":1,"column":3,"metric":"Top-5 Error","dataset":"ImageNet"}]}"#
        }
        "Scaling Width, Depth and Resolution Jointly" => {
            r#"{"models":[{"name":"DenseLink-201","row":0,"citation":5},{"name":"ScaleNet-B0","row":1,"citation":null},{"name":"ScaleNet-B7","row":2,"citation":null}],
 "observations":[
  {"model":"DenseLink-201","row":0,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"DenseLink-201","row":0,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"},
  {"model":"ScaleNet-B0","row":1,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"ScaleNet-B0","row":1,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"},
  {"model":"ScaleNet-B7","row":2,"column":1,"metric":"Top-1","dataset":"ImageNet"},
  {"model":"ScaleNet-B7","row":2,"column":2,"metric":"Top-5 Error","dataset":"ImageNet"}]}"#
        }
        "Attention-Only Sequence Transduction" => {
            r#"{"models":[{"name":"ConvSeq","row":0,"citation":3},{"name":"AttnOnly-big","row":1,"citation":null}],
 "observations":[
  {"model":"ConvSeq","row":0,"column":1,"metric":"BLEU","dataset":"WMT En-De"},
  {"model":"AttnOnly-big","row":1,"column":1,"metric":"BLEU","dataset":"WMT En-De"}]}"#
        }
        other => panic!("no scripted record for {other:?}"),
    };
    format!("```json\n{body}\n```\n")
}

/// Deterministic stand-in for the hosted models, used only to (re)record the
/// fixture transcript. Replies are chosen by agent model and paper title;
/// the attempt number is the count of earlier assistant turns.
pub struct ScriptedBackend {
    config: Config,
}

impl ScriptedBackend {
    pub fn new(config: &Config) -> Self {
        Self { config: config.clone() }
    }
}

fn prompt_title(request: &ChatRequest) -> String {
    let prompt = &request.messages.iter().find(|m| m.role == Role::User).expect("user turn").content;
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Paper title: "))
        .expect("prompt names the paper")
        .to_string()
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let attempt = request.messages.iter().filter(|m| m.role == Role::Assistant).count();
        let title = prompt_title(request);
        if request.model == self.config.mmap_model {
            Ok(mmap_reply(&title, attempt))
        } else if request.model == self.config.lchart_model {
            Ok(record_reply(&title, attempt))
        } else {
            panic!("unexpected model {}", request.model)
        }
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(request
            .texts
            .iter()
            .map(|t| {
                let lower = t.to_lowercase();
                let count = |w: &str| lower.matches(w).count() as f64;
                vec![count("network") + count("convolution"), count("attention") + count("translation"), t.len() as f64 / 1000.0]
            })
            .collect())
    }
}

pub fn run_one(cluster: &str, ask: &str, backend: &dyn Backend, out: &Path) -> RunReport {
    let config = Config::default();
    let instruction = Instruction::new(ask, cluster, None, &config.plan_model).expect("keyword intent");
    pipeline::run(&instruction, &corpus(), backend, out, &config).expect("pipeline run")
}

/// Every fixture run: both intents on both clusters.
pub fn run_all(backend: &dyn Backend, out: &Path) -> Vec<RunReport> {
    let mut reports = Vec::new();
    for cluster in CLUSTERS {
        for ask in [METHOD_ASK, EXPERIMENT_ASK] {
            reports.push(run_one(cluster, ask, backend, out));
        }
    }
    reports
}

/// Record the scripted model over every fixture request (runs and the
/// clustering embeddings) and return the transcript.
pub fn record_transcript(out: &Path) -> Transcript {
    let config = Config::default();
    let recorder = RecordingBackend::in_memory(Box::new(ScriptedBackend::new(&config)));
    run_all(&recorder, out);
    let corpus = corpus();
    let docs: Vec<&Document> = corpus.documents.values().collect();
    embed_abstracts(&docs, &recorder, &config.embed_model).expect("scripted embeddings");
    recorder.transcript()
}

/// SHA-256 of every file below `root`, keyed by relative path.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&path).unwrap())));
            }
        }
    }
    out
}

pub fn sha256_file(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))))
}

/// Copy every file below `from` into `to`, replacing what is there.
pub fn replace_tree(from: &Path, to: &Path) {
    if to.exists() {
        std::fs::remove_dir_all(to).unwrap();
    }
    for rel in tree_hashes(from).keys() {
        let dst = to.join(rel);
        std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
        std::fs::copy(from.join(rel), dst).unwrap();
    }
}

pub mod parser_corpus {
    use std::collections::BTreeMap;

    use chrono::NaiveDate;
    use pulsechain::corpus::DocumentMeta;
    use pulsechain::{Document, SectionKind};
    use serde::Deserialize;

    #[derive(Debug, Deserialize)]
    pub struct LabeledReference {
        pub index: u32,
        pub year: Option<i32>,
    }

    #[derive(Debug, Deserialize)]
    pub struct Labels {
        pub sections: Vec<SectionKind>,
        pub references: Vec<LabeledReference>,
    }

    pub fn dir() -> std::path::PathBuf {
        super::fixtures().join("parser")
    }

    /// Every labeled document with its labels, in name order.
    pub fn load() -> Vec<(Document, String, Labels)> {
        let labels: BTreeMap<String, Labels> =
            serde_json::from_str(&std::fs::read_to_string(dir().join("labels.json")).unwrap()).unwrap();
        labels
            .into_iter()
            .map(|(id, l)| {
                let source = std::fs::read_to_string(dir().join(format!("{id}.md"))).unwrap();
                let meta = DocumentMeta {
                    id: id.clone(),
                    title: id.clone(),
                    authors: vec![],
                    published_at: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                    venue: None,
                    source_path: format!("{id}.md").into(),
                };
                (Document::from_markdown(meta, &source), source, l)
            })
            .collect()
    }
}

pub mod strategies {
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use pulsechain::docparse::extract_tables;
    use pulsechain::lchart::{CellSource, Direction, ExperimentRecord, MetricObservation};
    use pulsechain::mmap::MotivationMethodPair;

    pub fn date() -> impl Strategy<Value = NaiveDate> {
        (1990i32..2030, 1u32..13, 1u32..29).prop_map(|(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).unwrap())
    }

    /// Free text that may contain markdown control characters but always
    /// has at least one visible character.
    pub fn inline_text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9#\\-\\\\*() \n]{0,30}[a-z]"
    }

    pub fn pair() -> impl Strategy<Value = MotivationMethodPair> {
        ("[a-f]{1,2}", inline_text(), inline_text(), inline_text(), date(), 0u32..3).prop_map(
            |(doc_id, title, motivation, method, published_at, repair_count)| MotivationMethodPair {
                doc_id,
                title,
                motivation,
                method,
                published_at,
                repair_count,
            },
        )
    }

    /// Pairs with distinct doc ids.
    pub fn pairs(max: usize) -> impl Strategy<Value = Vec<MotivationMethodPair>> {
        prop::collection::vec(pair(), 0..max).prop_map(|mut v| {
            let mut seen = std::collections::BTreeSet::new();
            v.retain(|p| seen.insert(p.doc_id.clone()));
            v
        })
    }

    fn observation(doc: usize) -> impl Strategy<Value = MetricObservation> {
        (
            prop::sample::select(vec!["A", "B", "C", "D"]),
            prop::sample::select(vec!["Top-1", "top-1", "FID", "BLEU"]),
            prop::option::of(prop::sample::select(vec!["ImageNet", "COCO"])),
            prop_oneof![9 => -50.0f64..150.0, 1 => Just(f64::NAN)],
            0usize..5,
        )
            .prop_map(move |(model, metric, dataset, value, row)| MetricObservation {
                model: model.to_string(),
                metric: metric.to_string(),
                dataset: dataset.map(str::to_string),
                value,
                direction: Direction::infer(metric),
                source: CellSource { doc_id: format!("d{doc}"), table: 0, row, column: 1 },
            })
    }

    pub fn records(max: usize) -> impl Strategy<Value = Vec<ExperimentRecord>> {
        prop::collection::vec(
            (
                date(),
                prop::collection::vec(prop::sample::select(vec!["A", "B", "C", "D"]), 0..3),
                prop::collection::vec(1890i32..2040, 3),
                0usize..1000,
            ),
            1..max,
        )
        .prop_flat_map(|docs| {
            let n = docs.len();
            (Just(docs), prop::collection::vec(prop::collection::vec(observation(0), 0..6), n))
        })
        .prop_map(|(docs, obs)| {
            let table = extract_tables("d", "| m | v |\n|---|---|\n| a | 1 |\n").tables.remove(0);
            docs.into_iter()
                .zip(obs)
                .enumerate()
                .map(|(i, ((published_at, baselines, years, _), mut observations))| {
                    for o in &mut observations {
                        o.source.doc_id = format!("d{i}");
                    }
                    ExperimentRecord {
                        doc_id: format!("d{i}"),
                        published_at,
                        table: table.clone(),
                        models: vec![],
                        observations,
                        baseline_years: baselines.iter().zip(years).map(|(m, y)| (m.to_string(), y)).collect(),
                        notes: vec![],
                        repair_count: 0,
                    }
                })
                .collect()
        })
    }
}
