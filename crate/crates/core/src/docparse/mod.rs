//! Markdown segmentation: typed sections, pipe tables and reference entries.

mod tables;

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::corpus::{ReferenceEntry, Section, SectionKind};

pub use tables::{extract_tables, parse_cell, tables_to_markdown, Cell, ParseNote, Table, TableExtraction};

/// Heading keyword rules, scanned in order; first match wins.
const KIND_KEYWORDS: &[(SectionKind, &[&str])] = &[
    (SectionKind::Abstract, &["abstract"]),
    (SectionKind::Introduction, &["introduction"]),
    (SectionKind::Method, &["method", "approach"]),
    (SectionKind::Experiment, &["experiment", "result", "evaluation"]),
    (SectionKind::References, &["reference", "bibliography"]),
];

static HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(#{1,2})[ \t]+(.*?)[ \t]*#*[ \t]*\r?\n?$").unwrap());

pub fn classify_heading(heading: &str) -> SectionKind {
    let lower = heading.to_lowercase();
    KIND_KEYWORDS
        .iter()
        .find(|(_, words)| words.iter().any(|w| lower.contains(w)))
        .map(|(kind, _)| *kind)
        .unwrap_or(SectionKind::Other)
}

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// Split markdown into one section per level-1 or level-2 heading.
///
/// Text before the first heading becomes an untitled `Other` section. The
/// section bodies, concatenated, equal the input with the heading lines removed.
/// A second `Abstract` or `References` heading is demoted to `Other`.
pub fn segment_sections(body: &str) -> Vec<Section> {
    let mut headings: Vec<(usize, usize, String)> = Vec::new(); // (line start, line end, text)
    let mut offset = 0;
    let mut in_fence = false;
    for line in body.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if is_fence(line) {
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            continue;
        }
        if let Some(caps) = HEADING.captures(line) {
            headings.push((start, offset, caps[2].to_string()));
        }
    }

    if headings.is_empty() {
        return vec![Section {
            kind: SectionKind::Other,
            heading: String::new(),
            body: body.to_string(),
            span: 0..body.len(),
        }];
    }

    let mut sections = Vec::with_capacity(headings.len() + 1);
    if headings[0].0 > 0 {
        sections.push(Section {
            kind: SectionKind::Other,
            heading: String::new(),
            body: body[..headings[0].0].to_string(),
            span: 0..headings[0].0,
        });
    }
    let mut seen_abstract = false;
    let mut seen_references = false;
    for (i, (_, body_start, heading)) in headings.iter().enumerate() {
        let body_end = headings.get(i + 1).map_or(body.len(), |h| h.0);
        let mut kind = classify_heading(heading);
        match kind {
            SectionKind::Abstract if seen_abstract => kind = SectionKind::Other,
            SectionKind::Abstract => seen_abstract = true,
            SectionKind::References if seen_references => kind = SectionKind::Other,
            SectionKind::References => seen_references = true,
            _ => {}
        }
        sections.push(Section {
            kind,
            heading: heading.clone(),
            body: body[*body_start..body_end].to_string(),
            span: *body_start..body_end,
        });
    }
    sections
}

static NUMBERED_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\[(\d{1,4})\]|(\d{1,3})\.)\s+(.*)$").unwrap());
static BULLET_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[-*+]\s+(.*)$").unwrap());

/// Split a References section into entries.
///
/// Entries start at `[n]` / `n.` markers, list bullets, or after a blank line;
/// other lines continue the current entry. Numbered entries keep their marker
/// number as index, unnumbered ones take their 1-based position. Sections of
/// any other kind yield no entries.
pub fn parse_references(section: &Section) -> Vec<ReferenceEntry> {
    if section.kind != SectionKind::References {
        return Vec::new();
    }
    split_reference_block(&section.body)
}

pub fn split_reference_block(body: &str) -> Vec<ReferenceEntry> {
    let mut raw_entries: Vec<(Option<u32>, String)> = Vec::new();
    let mut current: Option<(Option<u32>, String)> = None;

    for line in body.lines() {
        let t = line.trim();
        if t.is_empty() {
            raw_entries.extend(current.take());
            continue;
        }
        if let Some(caps) = NUMBERED_MARKER.captures(t) {
            raw_entries.extend(current.take());
            let n = caps
                .get(1)
                .or_else(|| caps.get(2))
                .and_then(|m| m.as_str().parse().ok());
            current = Some((n, caps[3].to_string()));
        } else if let Some(caps) = BULLET_MARKER.captures(t) {
            raw_entries.extend(current.take());
            current = Some((None, caps[1].to_string()));
        } else if let Some((_, text)) = current.as_mut() {
            text.push(' ');
            text.push_str(t);
        } else {
            current = Some((None, t.to_string()));
        }
    }
    raw_entries.extend(current);

    raw_entries
        .into_iter()
        .enumerate()
        .filter(|(_, (_, text))| !text.trim().is_empty())
        .map(|(pos, (n, text))| {
            ReferenceEntry::new(n.unwrap_or(pos as u32 + 1), crate::text::collapse_whitespace(&text))
        })
        .collect()
}

/// Per-document parse notes, written as `parse_report.json`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseReport {
    pub documents: Vec<DocumentNotes>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentNotes {
    pub doc_id: String,
    pub sections: usize,
    pub tables: usize,
    pub references: usize,
    pub notes: Vec<ParseNote>,
}

impl ParseReport {
    pub fn for_corpus(corpus: &crate::corpus::Corpus) -> Self {
        let documents = corpus
            .documents
            .values()
            .map(|doc| {
                let extraction = extract_tables(&doc.id, &doc.body_text());
                DocumentNotes {
                    doc_id: doc.id.clone(),
                    sections: doc.sections.len(),
                    tables: extraction.tables.len(),
                    references: doc.references.len(),
                    notes: extraction.notes,
                }
            })
            .collect();
        Self { documents }
    }
}
