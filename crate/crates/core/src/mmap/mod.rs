//! Method tracking: motivation/method pairs per paper, sorted into a chain,
//! emitted as hierarchical markdown and drawn as a mind map.

mod layout;
mod markdown;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatRequest, Message};
use crate::pipeline::ExtractedDocument;
use crate::repair::{complete_with_repair, RepairError};

pub use layout::{layout_mindmap, render_mindmap, LayoutNode, MindMapLayout, NodeKind, WRAP_WIDTH};
pub use markdown::{emit_chain_markdown, validate_chain_markdown, Violation};

/// Upper bound on motivation and method length, in characters.
pub const MAX_FIELD_CHARS: usize = 2000;

#[derive(Debug, thiserror::Error)]
pub enum MmapError {
    #[error("extraction for {doc_id} failed after {attempts} attempt(s): {}", .violations.join("; "))]
    ExtractionFailed {
        doc_id: String,
        attempts: u32,
        violations: Vec<String>,
    },
    #[error("document {0} has neither abstract nor introduction")]
    NoContent(String),
    #[error("document {0} appears twice in the chain")]
    DuplicateDoc(String),
    #[error("chain is empty")]
    EmptyChain,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotivationMethodPair {
    pub doc_id: String,
    pub title: String,
    pub motivation: String,
    pub method: String,
    pub published_at: NaiveDate,
    pub repair_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodChain {
    pub cluster_id: String,
    pub label: String,
    pub pairs: Vec<MotivationMethodPair>,
}

/// Model, prompt and retry settings for one agent.
#[derive(Debug, Clone)]
pub struct AgentSettings {
    pub model: String,
    pub template: String,
    /// Total replies allowed per extraction.
    pub repair_limit: u32,
    pub max_tokens: u32,
}

impl AgentSettings {
    pub fn mmap(config: &crate::Config) -> Result<Self, crate::config::ConfigError> {
        Ok(Self {
            model: config.mmap_model.clone(),
            template: config.mmap_template()?,
            repair_limit: config.repair_limit,
            max_tokens: config.max_tokens,
        })
    }

    pub fn lchart(config: &crate::Config) -> Result<Self, crate::config::ConfigError> {
        Ok(Self {
            model: config.lchart_model.clone(),
            template: config.lchart_template()?,
            repair_limit: config.repair_limit,
            max_tokens: config.max_tokens,
        })
    }

    pub(crate) fn request(&self, system: &str, prompt: String) -> ChatRequest {
        let mut req = ChatRequest::new(&self.model, vec![Message::system(system), Message::user(prompt)]);
        req.max_tokens = self.max_tokens;
        req
    }
}

pub const SYSTEM_PROMPT: &str = "You are a careful extractor of structured information from scientific papers.";

pub fn build_prompt(template: &str, xdoc: &ExtractedDocument) -> String {
    template
        .replace("{{title}}", &xdoc.title)
        .replace("{{abstract}}", xdoc.abstract_text.trim())
        .replace("{{introduction}}", xdoc.introduction.trim())
}

/// The extraction request issued first for `xdoc`.
pub fn pair_request(xdoc: &ExtractedDocument, settings: &AgentSettings) -> ChatRequest {
    settings.request(SYSTEM_PROMPT, build_prompt(&settings.template, xdoc))
}

/// Contents of the first fenced block whose info string is `info` (or empty).
pub(crate) fn fenced_block<'a>(reply: &'a str, info: &str) -> Option<&'a str> {
    enum State {
        Outside,
        Other,
        Target(usize),
    }
    let mut offset = 0;
    let mut state = State::Outside;
    for line in reply.split_inclusive('\n') {
        let t = line.trim();
        match state {
            State::Target(start) if t == "```" => return Some(&reply[start..offset]),
            State::Other if t == "```" => state = State::Outside,
            State::Outside => {
                if let Some(tag) = t.strip_prefix("```") {
                    let tag = tag.trim();
                    state = if tag.is_empty() || tag.eq_ignore_ascii_case(info) {
                        State::Target(offset + line.len())
                    } else {
                        State::Other
                    };
                }
            }
            _ => {}
        }
        offset += line.len();
    }
    None
}

/// Parse a reply against the two-field contract; returns (motivation, method).
pub fn parse_pair_reply(reply: &str) -> Result<(String, String), Vec<String>> {
    let Some(block) = fenced_block(reply, "pair") else {
        return Err(vec!["reply has no fenced ```pair block".into()]);
    };
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut violations = Vec::new();
    for line in block.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let key = t.split_once(':').map(|(k, v)| (k.trim().to_lowercase(), v.trim()));
        match key {
            Some((k, v)) if k == "motivation" || k == "method" => {
                if fields.iter().any(|(existing, _)| *existing == k) {
                    violations.push(format!("field {k} given twice"));
                }
                fields.push((k, v.to_string()));
            }
            _ => match fields.last_mut() {
                Some((_, v)) => {
                    v.push(' ');
                    v.push_str(t);
                }
                None => violations.push(format!("unexpected line before any field: {t:?}")),
            },
        }
    }
    let get = |name: &str| {
        fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| crate::text::collapse_whitespace(v))
    };
    let motivation = get("motivation");
    let method = get("method");
    for (name, value) in [("motivation", &motivation), ("method", &method)] {
        match value {
            None => violations.push(format!("missing field {name}")),
            Some(v) if v.is_empty() => violations.push(format!("field {name} is empty")),
            _ => {}
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    let cap = |s: String| crate::text::truncate_at_word(&s, MAX_FIELD_CHARS);
    Ok((cap(motivation.unwrap()), cap(method.unwrap())))
}

/// Extract (motivation, method) for one document, repairing malformed replies.
pub fn extract_pair(
    xdoc: &ExtractedDocument,
    backend: &dyn Backend,
    settings: &AgentSettings,
) -> Result<MotivationMethodPair, MmapError> {
    if xdoc.abstract_text.trim().is_empty() && xdoc.introduction.trim().is_empty() {
        return Err(MmapError::NoContent(xdoc.doc_id.clone()));
    }
    let outcome = complete_with_repair(backend, pair_request(xdoc, settings), settings.repair_limit, parse_pair_reply)
        .map_err(|e| match e {
            RepairError::Exhausted { attempts, violations } => MmapError::ExtractionFailed {
                doc_id: xdoc.doc_id.clone(),
                attempts,
                violations,
            },
            RepairError::Backend(b) => MmapError::Backend(b),
        })?;
    let (motivation, method) = outcome.value;
    Ok(MotivationMethodPair {
        doc_id: xdoc.doc_id.clone(),
        title: xdoc.title.clone(),
        motivation,
        method,
        published_at: xdoc.published_at,
        repair_count: outcome.repair_count,
    })
}

/// Stable sort by (publication date, doc id).
pub fn sort_chain(
    cluster_id: &str,
    label: &str,
    mut pairs: Vec<MotivationMethodPair>,
) -> Result<MethodChain, MmapError> {
    let mut seen = std::collections::BTreeSet::new();
    for p in &pairs {
        if !seen.insert(p.doc_id.as_str()) {
            return Err(MmapError::DuplicateDoc(p.doc_id.clone()));
        }
    }
    pairs.sort_by(|a, b| a.published_at.cmp(&b.published_at).then_with(|| a.doc_id.cmp(&b.doc_id)));
    Ok(MethodChain {
        cluster_id: cluster_id.to_string(),
        label: label.to_string(),
        pairs,
    })
}
