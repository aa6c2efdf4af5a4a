//! Reconstruction of research development chains from clusters of related papers.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] loads cluster manifests and markdown documents and links citations.
//! * [`docparse`] segments markdown into sections, pipe tables and reference entries.
//! * [`clusterer`] groups documents by abstract embeddings with seeded K-Means.
//! * [`backend`] is the chat/embedding gateway with transcript record and replay.
//! * [`pipeline`] routes an instruction to one of the two agents and writes artifacts.
//! * [`mmap`] builds motivation/method chains and mind-map figures.
//! * [`lchart`] builds aligned experiment chains and line charts.
//! * [`metrics`] scores produced artifacts against references.

pub mod backend;
pub mod clusterer;
pub mod config;
pub mod corpus;
pub mod docparse;
pub mod lchart;
pub mod metrics;
pub mod mmap;
pub mod pipeline;
pub mod render;
mod repair;
mod text;

pub use backend::{Backend, ChatRequest, EmbedRequest, Message, Transcript};
pub use config::Config;
pub use corpus::{Cluster, Corpus, Document, ReferenceEntry, Section, SectionKind, Split};
pub use metrics::GrayImage;
