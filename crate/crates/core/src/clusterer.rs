//! Topic grouping: abstract embeddings, seeded K-Means and frequency labels.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, EmbedRequest};
use crate::corpus::{Corpus, Document, Manifest, ManifestCluster, ManifestDoc, SectionKind, Split};

pub const MAX_ITERATIONS: usize = 100;

static STOPWORDS: LazyLock<BTreeSet<&'static str>> = LazyLock::new(|| {
    include_str!("../data/stopwords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
});

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("document {0} has no abstract text to embed")]
    EmptyText(String),
    #[error("embedding dimension mismatch at {doc_id}: expected {expected}, found {found}")]
    DimensionMismatch {
        doc_id: String,
        expected: usize,
        found: usize,
    },
    #[error("k = {k} exceeds the number of points ({n})")]
    KExceedsN { k: usize, n: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("vector {0} has non-finite components")]
    NonFinite(String),
    #[error(transparent)]
    Backend(BackendError),
}

impl From<BackendError> for ClusterError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::DimensionMismatch { index, expected, found } => ClusterError::DimensionMismatch {
                doc_id: format!("#{index}"),
                expected,
                found,
            },
            other => ClusterError::Backend(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub doc_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    /// Cluster index per input vector, in input order.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Embed each document's abstract in one backend call.
pub fn embed_abstracts(
    docs: &[&Document],
    backend: &dyn Backend,
    model: &str,
) -> Result<Vec<EmbeddingVector>, ClusterError> {
    let texts = docs
        .iter()
        .map(|d| {
            d.section(SectionKind::Abstract)
                .map(|s| s.body.trim().to_string())
                .filter(|t| !t.is_empty())
                .ok_or_else(|| ClusterError::EmptyText(d.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vectors = backend.embed(&EmbedRequest { model: model.to_string(), texts })?;
    if vectors.len() != docs.len() {
        return Err(ClusterError::Backend(BackendError::Malformed(format!(
            "expected {} vectors, got {}",
            docs.len(),
            vectors.len()
        ))));
    }
    let out: Vec<EmbeddingVector> = docs
        .iter()
        .zip(vectors)
        .map(|(d, values)| EmbeddingVector { doc_id: d.id.clone(), values })
        .collect();
    check_dimensions(&out)?;
    Ok(out)
}

fn check_dimensions(vectors: &[EmbeddingVector]) -> Result<(), ClusterError> {
    let Some(first) = vectors.first() else { return Ok(()) };
    let dim = first.values.len();
    for v in vectors {
        if v.values.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                doc_id: v.doc_id.clone(),
                expected: dim,
                found: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinite(v.doc_id.clone()));
        }
    }
    Ok(())
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

fn means(points: &[Vec<f64>], labels: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((sum, n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                sum.into_iter().map(|s| s / n as f64).collect()
            }
        })
        .collect()
}

/// Lloyd's algorithm from `k` distinct input points picked by a seeded shuffle.
///
/// Iterates until the assignment is stable or [`MAX_ITERATIONS`] is reached.
/// A cluster that loses all its points keeps its previous centroid.
pub fn kmeans(vectors: &[EmbeddingVector], k: usize, seed: u64) -> Result<ClusterAssignment, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > vectors.len() {
        return Err(ClusterError::KExceedsN { k, n: vectors.len() });
    }
    check_dimensions(vectors)?;
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut centroids: Vec<Vec<f64>> = order[..k].iter().map(|&i| points[i].clone()).collect();

    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        points.par_iter().map(|p| nearest(p, centroids).0).collect()
    };

    let mut labels = assign(&centroids);
    let mut trace = vec![inertia(&points, &labels, &centroids)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        centroids = means(&points, &labels, &centroids);
        let next = assign(&centroids);
        trace.push(inertia(&points, &next, &centroids));
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }

    let final_inertia = *trace.last().unwrap();
    let assignments = vectors
        .iter()
        .zip(&labels)
        .map(|(v, &l)| (v.doc_id.clone(), l))
        .collect();
    Ok(ClusterAssignment {
        k,
        assignments,
        labels,
        centroids,
        inertia: final_inertia,
        inertia_trace: trace,
        iterations,
        converged,
    })
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

/// Top three non-stopword tokens of titles and abstracts, hyphen-joined.
///
/// Ties in frequency are broken lexicographically. Tokens without any
/// alphabetic character are ignored.
pub fn label_cluster(docs: &[&Document]) -> String {
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for d in docs {
        let abstract_text = d.section(SectionKind::Abstract).map_or("", |s| s.body.as_str());
        for tok in crate::text::tokenize(&d.title)
            .into_iter()
            .chain(crate::text::tokenize(abstract_text))
        {
            if is_stopword(&tok) || !tok.chars().any(char::is_alphabetic) {
                continue;
            }
            *freq.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if ranked.is_empty() {
        return "unlabeled".to_string();
    }
    ranked.into_iter().take(3).map(|(t, _)| t).collect::<Vec<_>>().join("-")
}

/// Turn an assignment into a manifest (`clusters_out.json`) over the same documents.
///
/// Each new cluster takes the majority split of its members (ties → train).
pub fn assignment_manifest(corpus: &Corpus, vectors: &[EmbeddingVector], result: &ClusterAssignment) -> Manifest {
    let original_split: BTreeMap<&str, Split> = corpus
        .clusters
        .iter()
        .flat_map(|c| c.doc_ids.iter().map(move |d| (d.as_str(), c.split)))
        .collect();
    let mut clusters = Vec::new();
    for idx in 0..result.k {
        let members: Vec<&Document> = vectors
            .iter()
            .zip(&result.labels)
            .filter(|(_, &l)| l == idx)
            .filter_map(|(v, _)| corpus.document(&v.doc_id))
            .collect();
        if members.is_empty() {
            continue;
        }
        let tests = members
            .iter()
            .filter(|d| original_split.get(d.id.as_str()) == Some(&Split::Test))
            .count();
        let split = if tests * 2 > members.len() { Split::Test } else { Split::Train };
        clusters.push(ManifestCluster {
            id: format!("k{idx}"),
            label: label_cluster(&members),
            split,
            docs: members
                .iter()
                .map(|d| ManifestDoc {
                    id: d.id.clone(),
                    path: d.source_path.to_string_lossy().replace('\\', "/"),
                    title: d.title.clone(),
                    published_at: d.published_at.format("%Y-%m-%d").to_string(),
                    authors: d.authors.clone(),
                    venue: d.venue.clone(),
                })
                .collect(),
        });
    }
    Manifest { clusters }
}
