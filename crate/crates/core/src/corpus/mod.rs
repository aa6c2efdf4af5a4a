//! Cluster manifests, parsed documents and the citation graph between them.

mod metadata;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use crate::docparse;
use crate::text::normalize_title;

pub use metadata::{fetch_metadata, MetadataError, MetadataRecord, MetadataSource};

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2099;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    ManifestSchema(String),
    #[error("document {doc_id} is listed but {path} does not exist")]
    MissingDocument { doc_id: String, path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    Abstract,
    Introduction,
    Method,
    Experiment,
    References,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub heading: String,
    pub body: String,
    /// Byte range of `body` in the source text.
    pub span: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    /// Marker number for numbered bibliographies, otherwise 1-based position.
    pub index: u32,
    pub raw: String,
    pub year: Option<i32>,
    pub matched_doc: Option<String>,
}

impl ReferenceEntry {
    pub fn new(index: u32, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let year = resolve_reference_year(&raw);
        Self {
            index,
            raw,
            year,
            matched_doc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub published_at: NaiveDate,
    pub venue: Option<String>,
    /// Path relative to the manifest directory.
    pub source_path: PathBuf,
    pub sections: Vec<Section>,
    pub references: Vec<ReferenceEntry>,
}

impl Document {
    /// Build a document from markdown source and metadata.
    pub fn from_markdown(meta: DocumentMeta, source: &str) -> Self {
        let sections = docparse::segment_sections(source);
        let references = sections
            .iter()
            .find(|s| s.kind == SectionKind::References)
            .map(docparse::parse_references)
            .unwrap_or_default();
        Self {
            id: meta.id,
            title: meta.title,
            authors: meta.authors,
            published_at: meta.published_at,
            venue: meta.venue,
            source_path: meta.source_path,
            sections,
            references,
        }
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    /// Section bodies joined in order; the source text minus heading lines.
    pub fn body_text(&self) -> String {
        self.sections.iter().map(|s| s.body.as_str()).collect()
    }
}

/// Metadata for one document, as listed in a manifest.
#[derive(Debug, Clone)]
pub struct DocumentMeta {
    pub id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub published_at: NaiveDate,
    pub venue: Option<String>,
    pub source_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[serde(alias = "Train")]
    Train,
    #[serde(alias = "Test")]
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Test => f.write_str("test"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub label: String,
    pub split: Split,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CitationEdge {
    pub from_doc: String,
    pub to_doc: String,
    pub via_reference: u32,
}

/// On-disk manifest (`corpus.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub clusters: Vec<ManifestCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCluster {
    pub id: String,
    pub label: String,
    pub split: Split,
    pub docs: Vec<ManifestDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub id: String,
    pub path: String,
    pub title: String,
    pub published_at: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: Option<String>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(text).map_err(|e| CorpusError::ManifestSchema(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Cluster-size statistics for one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub clusters: usize,
    pub documents: usize,
    pub min_papers: usize,
    pub max_papers: usize,
    pub mean_papers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub root: PathBuf,
    pub clusters: Vec<Cluster>,
    pub documents: BTreeMap<String, Document>,
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    let date = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| format!("invalid date {s:?}: {e}"))?;
    if !(MIN_YEAR..=MAX_YEAR).contains(&date.year()) {
        return Err(format!("date {s} outside {MIN_YEAR}-{MAX_YEAR}"));
    }
    Ok(date)
}

/// Load a manifest and every document it lists.
///
/// Document paths are resolved against the manifest's directory. Documents are
/// parsed in parallel and merged back in manifest order.
pub fn load_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    let manifest = Manifest::read(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Corpus::from_manifest(&manifest, &root)
}

impl Corpus {
    pub fn from_manifest(manifest: &Manifest, root: &Path) -> Result<Self, CorpusError> {
        let schema = |msg: String| CorpusError::ManifestSchema(msg);
        let mut clusters = Vec::with_capacity(manifest.clusters.len());
        let mut metas: Vec<DocumentMeta> = Vec::new();
        let mut seen_docs: BTreeMap<&str, &ManifestDoc> = BTreeMap::new();
        let mut cluster_ids = BTreeSet::new();

        for mc in &manifest.clusters {
            if !cluster_ids.insert(mc.id.as_str()) {
                return Err(schema(format!("duplicate cluster id {}", mc.id)));
            }
            if mc.docs.is_empty() {
                return Err(schema(format!("cluster {} lists no documents", mc.id)));
            }
            let mut in_cluster = BTreeSet::new();
            for md in &mc.docs {
                if md.id.trim().is_empty() {
                    return Err(schema(format!("cluster {} has a document with empty id", mc.id)));
                }
                if !in_cluster.insert(md.id.as_str()) {
                    return Err(schema(format!("cluster {} lists {} twice", mc.id, md.id)));
                }
                match seen_docs.get(md.id.as_str()) {
                    Some(prev) if *prev != md => {
                        return Err(schema(format!(
                            "document id {} declared twice with different metadata",
                            md.id
                        )));
                    }
                    Some(_) => continue,
                    None => {
                        seen_docs.insert(&md.id, md);
                    }
                }
                let published_at = parse_date(&md.published_at)
                    .map_err(|e| schema(format!("document {}: {e}", md.id)))?;
                metas.push(DocumentMeta {
                    id: md.id.clone(),
                    title: md.title.clone(),
                    authors: md.authors.clone(),
                    published_at,
                    venue: md.venue.clone(),
                    source_path: PathBuf::from(&md.path),
                });
            }
            clusters.push(Cluster {
                id: mc.id.clone(),
                label: mc.label.clone(),
                split: mc.split,
                doc_ids: mc.docs.iter().map(|d| d.id.clone()).collect(),
            });
        }

        let parsed: Vec<Result<Document, CorpusError>> = metas
            .into_par_iter()
            .map(|meta| {
                let full = root.join(&meta.source_path);
                let source = match std::fs::read(&full) {
                    Ok(bytes) => String::from_utf8(bytes).map_err(|e| {
                        schema(format!("document {} is not UTF-8: {e}", meta.id))
                    })?,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return Err(CorpusError::MissingDocument {
                            doc_id: meta.id,
                            path: full,
                        })
                    }
                    Err(source) => return Err(CorpusError::Io { path: full, source }),
                };
                Ok(Document::from_markdown(meta, &source))
            })
            .collect();

        let mut documents = BTreeMap::new();
        for doc in parsed {
            let doc = doc?;
            documents.insert(doc.id.clone(), doc);
        }

        Ok(Self {
            root: root.to_path_buf(),
            clusters,
            documents,
        })
    }

    pub fn cluster(&self, id: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.id == id)
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.get(id)
    }

    pub fn cluster_documents<'a>(&'a self, cluster: &'a Cluster) -> impl Iterator<Item = &'a Document> {
        cluster.doc_ids.iter().filter_map(|id| self.documents.get(id))
    }

    pub fn split_stats(&self) -> BTreeMap<Split, SplitStats> {
        let mut sizes: BTreeMap<Split, Vec<usize>> = BTreeMap::new();
        for c in &self.clusters {
            sizes.entry(c.split).or_default().push(c.doc_ids.len());
        }
        sizes
            .into_iter()
            .map(|(split, sizes)| (split, SplitStats::from_sizes(&sizes)))
            .collect()
    }

    /// Citation edges between documents of this corpus; see [`build_citation_graph`].
    pub fn citation_graph(&self) -> Vec<CitationEdge> {
        build_citation_graph(self.documents.values())
    }

    /// Build the citation graph and record each matched document on its reference entry.
    pub fn link_citations(&mut self) -> Vec<CitationEdge> {
        let matches = match_references(self.documents.values());
        for (from, index, to) in &matches {
            if let Some(doc) = self.documents.get_mut(from) {
                for entry in doc.references.iter_mut().filter(|e| e.index == *index) {
                    entry.matched_doc = Some(to.clone());
                }
            }
        }
        edges_from_matches(matches)
    }

    /// Every edge endpoint and referenced entry exists.
    pub fn check_edges(&self, edges: &[CitationEdge]) -> Result<(), String> {
        for e in edges {
            if e.from_doc == e.to_doc {
                return Err(format!("self edge on {}", e.from_doc));
            }
            let from = self
                .documents
                .get(&e.from_doc)
                .ok_or_else(|| format!("unknown source {}", e.from_doc))?;
            if !self.documents.contains_key(&e.to_doc) {
                return Err(format!("unknown target {}", e.to_doc));
            }
            if !from.references.iter().any(|r| r.index == e.via_reference) {
                return Err(format!("{} has no reference {}", e.from_doc, e.via_reference));
            }
        }
        Ok(())
    }
}

impl SplitStats {
    fn from_sizes(sizes: &[usize]) -> Self {
        let documents: usize = sizes.iter().sum();
        Self {
            clusters: sizes.len(),
            documents,
            min_papers: sizes.iter().copied().min().unwrap_or(0),
            max_papers: sizes.iter().copied().max().unwrap_or(0),
            mean_papers: if sizes.is_empty() {
                0.0
            } else {
                documents as f64 / sizes.len() as f64
            },
        }
    }
}

/// Edge A→B iff some reference entry of A contains B's normalized title as a
/// whole-word run. Each entry matches at most one document (the longest title).
/// Output is sorted and has at most one edge per (from, to) pair.
pub fn build_citation_graph<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Vec<CitationEdge> {
    edges_from_matches(match_references(docs))
}

fn match_references<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Vec<(String, u32, String)> {
    let mut docs: Vec<&Document> = docs.into_iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    let titles: Vec<(String, &str)> = docs
        .iter()
        .map(|d| (format!(" {} ", normalize_title(&d.title)), d.id.as_str()))
        .filter(|(t, _)| !t.trim().is_empty())
        .collect();

    let mut matches = Vec::new();
    for doc in &docs {
        for entry in &doc.references {
            let raw = format!(" {} ", normalize_title(&entry.raw));
            let best = titles
                .iter()
                .filter(|(title, id)| *id != doc.id && raw.contains(title.as_str()))
                .max_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| b.1.cmp(a.1)));
            if let Some((_, to)) = best {
                matches.push((doc.id.clone(), entry.index, to.to_string()));
            }
        }
    }
    matches
}

fn edges_from_matches(matches: Vec<(String, u32, String)>) -> Vec<CitationEdge> {
    let mut best: BTreeMap<(String, String), u32> = BTreeMap::new();
    for (from, index, to) in matches {
        best.entry((from, to))
            .and_modify(|v| *v = (*v).min(index))
            .or_insert(index);
    }
    best.into_iter()
        .map(|((from_doc, to_doc), via_reference)| CitationEdge {
            from_doc,
            to_doc,
            via_reference,
        })
        .collect()
}

static DIGIT_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new("[0-9]+").unwrap());

/// The last 4-digit token in 1900–2099 that is not part of a longer digit run.
pub fn resolve_reference_year(raw: &str) -> Option<i32> {
    DIGIT_RUN
        .find_iter(raw)
        .filter(|m| m.as_str().len() == 4)
        .filter_map(|m| m.as_str().parse::<i32>().ok())
        .filter(|y| (MIN_YEAR..=MAX_YEAR).contains(y))
        .last()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str, refs: &[&str]) -> Document {
        Document {
            id: id.into(),
            title: title.into(),
            authors: vec![],
            published_at: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            venue: None,
            source_path: PathBuf::from(format!("{id}.md")),
            sections: vec![],
            references: refs
                .iter()
                .enumerate()
                .map(|(i, r)| ReferenceEntry::new(i as u32 + 1, *r))
                .collect(),
        }
    }

    #[test]
    fn year_examples() {
        assert_eq!(
            resolve_reference_year("A. Vaswani et al. Attention Is All You Need. NeurIPS, 2017."),
            Some(2017)
        );
        assert_eq!(resolve_reference_year("Preprint, arXiv, 2021."), Some(2021));
        assert_eq!(resolve_reference_year("Technical report, no date"), None);
        assert_eq!(resolve_reference_year("ID 120170, 1850, 2150"), None);
        assert_eq!(resolve_reference_year("CVPR 2016, pp. 770-778"), Some(2016));
        assert_eq!(resolve_reference_year("arXiv:1512.03385, 2015"), Some(2015));
    }

    #[test]
    fn verbatim_title_yields_single_edge() {
        let a = doc("a", "Deep Residual Learning", &[]);
        let b = doc("b", "Follow Up", &["K. He. Deep residual learning. CVPR 2016."]);
        let edges = build_citation_graph([&a, &b]);
        assert_eq!(
            edges,
            vec![CitationEdge {
                from_doc: "b".into(),
                to_doc: "a".into(),
                via_reference: 1
            }]
        );
    }

    #[test]
    fn no_cross_citations_no_edges() {
        let a = doc("a", "Alpha Method", &["Unrelated work. 2001."]);
        let b = doc("b", "Beta Method", &["Something else. 2002."]);
        assert!(build_citation_graph([&a, &b]).is_empty());
    }

    #[test]
    fn self_citation_is_ignored() {
        let a = doc("a", "Alpha Method", &["Alpha method, 2019."]);
        assert!(build_citation_graph([&a]).is_empty());
    }

    #[test]
    fn partial_word_titles_do_not_match() {
        let a = doc("a", "Net", &[]);
        let b = doc("b", "Other", &["ResNet is strong. 2016."]);
        assert!(build_citation_graph([&a, &b]).is_empty());
    }

    #[test]
    fn duplicate_citations_collapse_to_lowest_reference() {
        let a = doc("a", "Alpha Method", &[]);
        let b = doc("b", "Beta", &["x", "Alpha method. 2019", "Alpha Method (extended). 2020"]);
        let edges = build_citation_graph([&a, &b]);
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].via_reference, 2);
    }

    #[test]
    fn parse_date_bounds() {
        assert!(parse_date("2017-06-12").is_ok());
        assert!(parse_date("1899-12-31").is_err());
        assert!(parse_date("2100-01-01").is_err());
        assert!(parse_date("2017/06/12").is_err());
    }

    #[test]
    fn manifest_rejects_unknown_fields_and_empty_clusters() {
        assert!(matches!(
            Manifest::from_json(r#"{"clusters":[{"id":"c","label":"l","split":"train","docs":[],"x":1}]}"#),
            Err(CorpusError::ManifestSchema(_))
        ));
        let m = Manifest::from_json(r#"{"clusters":[{"id":"c","label":"l","split":"test","docs":[]}]}"#)
            .unwrap();
        assert!(matches!(
            Corpus::from_manifest(&m, Path::new(".")),
            Err(CorpusError::ManifestSchema(_))
        ));
    }
}
