use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use pulsechain::backend::{self, Mode};
use pulsechain::clusterer::{assignment_manifest, embed_abstracts, kmeans};
use pulsechain::corpus::load_manifest;
use pulsechain::docparse::ParseReport;
use pulsechain::metrics::evaluate_dirs;
use pulsechain::pipeline::{self, Instruction};
use pulsechain::{Config, Document};

/// Reconstruct research development chains from clusters of related papers.
#[derive(Parser)]
#[command(name = "pulsechain", version, about)]
struct Cli {
    /// Configuration file (defaults to ./pulse.toml when present)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Debug logging
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse every document of a manifest and report per-split statistics
    Ingest {
        manifest: PathBuf,
        /// Where to write per-document parse notes
        #[arg(long, default_value = "parse_report.json")]
        report: PathBuf,
    },
    /// Re-cluster a corpus by abstract embeddings
    Cluster {
        #[arg(long, default_value = "corpus.json")]
        manifest: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "replay")]
        backend: Mode,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Output manifest; defaults to clusters_out.json next to the input
        /// manifest so that document paths stay valid
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer an instruction over one cluster and write its artifacts
    Run {
        #[arg(long)]
        cluster: String,
        #[arg(long)]
        ask: String,
        #[arg(long, default_value = "corpus.json")]
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        backend: Mode,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score produced artifacts against golden ones
    Eval {
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        actual: PathBuf,
        #[arg(long, default_value = "eval_report.json")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None if Path::new("pulse.toml").is_file() => Config::load(Path::new("pulse.toml")).context("loading pulse.toml"),
        None => Ok(Config::default()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let config = load_config(cli.config.as_deref())?;

    match cli.command {
        Command::Ingest { manifest, report } => {
            let mut corpus = load_manifest(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
            let edges = corpus.link_citations();
            write_json(&report, &ParseReport::for_corpus(&corpus))?;
            println!("documents: {}  citation edges: {}", corpus.documents.len(), edges.len());
            for (split, s) in corpus.split_stats() {
                println!(
                    "{:<5} clusters={} documents={} papers/cluster mean={:.2} min={} max={}",
                    format!("{split:?}").to_lowercase(),
                    s.clusters,
                    s.documents,
                    s.mean_papers,
                    s.min_papers,
                    s.max_papers
                );
            }
        }
        Command::Cluster { manifest, k, seed, backend, transcript, out } => {
            let corpus = load_manifest(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
            let backend = backend::open(backend, transcript.as_deref(), &config)?;
            let docs: Vec<&Document> = corpus.documents.values().collect();
            let vectors = embed_abstracts(&docs, &backend, &config.embed_model)?;
            let result = kmeans(&vectors, k, seed)?;
            info!("k-means converged={} after {} iterations", result.converged, result.iterations);
            let out = out.unwrap_or_else(|| manifest.with_file_name("clusters_out.json"));
            write_json(&out, &assignment_manifest(&corpus, &vectors, &result))?;
            println!("k={k} seed={seed} inertia={:.6} -> {}", result.inertia, out.display());
        }
        Command::Run { cluster, ask, manifest, backend, transcript, out } => {
            let corpus = load_manifest(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
            let backend = backend::open(backend, transcript.as_deref(), &config)?;
            let instruction = Instruction::new(&ask, &cluster, Some(&backend), &config.plan_model)?;
            let report = pipeline::run(&instruction, &corpus, &backend, &out, &config)?;
            for a in &report.artifacts {
                println!("{}", out.join(a).display());
            }
            for f in &report.failures {
                eprintln!("warning: {} failed at {}: {}", f.doc_id, f.stage, f.error);
            }
            if !report.render_ok {
                bail!(
                    "no figure rendered for {}: {}",
                    report.cluster_id,
                    report.render_error.as_deref().unwrap_or("unknown error")
                );
            }
        }
        Command::Eval { golden, actual, out } => {
            let report = evaluate_dirs(&golden, &actual)?;
            write_json(&out, &report)?;
            println!("{} pairs scored, {} missing -> {}", report.pairs.len(), report.missing.len(), out.display());
        }
    }
    Ok(())
}
