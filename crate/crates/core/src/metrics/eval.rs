//! Directory-level evaluation: pair golden and produced artifacts by
//! relative path and score each pair.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{meteor_score, pass_at_1, psnr, ssim, GrayImage, Outcome, SsimMode};

/// Metrics that need pretrained networks and are never computed here.
pub const UNAVAILABLE_METRICS: &[&str] =
    &["bertscore", "gpt_score", "is", "fid", "kid", "clip_fid", "lpips", "cmmd"];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PairScore {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms_ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub pairs: Vec<PairScore>,
    /// Golden artifacts with no counterpart in the actual tree.
    pub missing: Vec<String>,
    /// Chart generations found in the actual tree's run reports.
    pub chart_runs: usize,
    /// Fraction of those that rendered; absent when there were none.
    pub pass_at_1: Option<f64>,
    pub unavailable: Vec<&'static str>,
    pub scale_note: &'static str,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.to_path_buf(), source }
}

/// Files under `root` with one of `extensions`, as sorted relative paths.
fn collect(root: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, EvalError> {
    let mut out = Vec::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let dir = root.join(&rel);
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let child = rel.join(entry.file_name());
            if entry.file_type().map_err(io_err(&dir))?.is_dir() {
                stack.push(child);
            } else if child.extension().and_then(|e| e.to_str()).is_some_and(|e| extensions.contains(&e)) {
                out.push(child);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn score_raster(golden: &Path, actual: &Path, score: &mut PairScore) {
    let (a, b) = match (GrayImage::read_pgm(golden), GrayImage::read_pgm(actual)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            score.errors.push(e.to_string());
            return;
        }
    };
    let mut record = |r: Result<f64, super::MetricError>, slot: &mut Option<f64>| match r {
        Ok(v) => *slot = Some(v),
        Err(e) => score.errors.push(e.to_string()),
    };
    let (mut p, mut s, mut ms) = (None, None, None);
    record(psnr(&a, &b), &mut p);
    record(ssim(&a, &b, SsimMode::Single), &mut s);
    record(ssim(&a, &b, SsimMode::MultiScale), &mut ms);
    (score.psnr, score.ssim, score.ms_ssim) = (p, s, ms);
}

fn score_text(golden: &Path, actual: &Path, score: &mut PairScore) -> Result<(), EvalError> {
    let reference = std::fs::read_to_string(golden).map_err(io_err(golden))?;
    let candidate = std::fs::read_to_string(actual).map_err(io_err(actual))?;
    match meteor_score(&candidate, &reference) {
        Ok(v) => score.meteor = Some(v),
        Err(e) => score.errors.push(e.to_string()),
    }
    Ok(())
}

/// Chart outcomes from every experimental-analysis `report.json` under `root`.
fn chart_outcomes(root: &Path) -> Result<Vec<Outcome>, EvalError> {
    let mut outcomes = Vec::new();
    for rel in collect(root, &["json"])? {
        if rel.file_name().and_then(|n| n.to_str()) != Some("report.json") {
            continue;
        }
        let path = root.join(&rel);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) else { continue };
        if v["intent"] == "experimental_analysis" {
            if let Some(ok) = v["render_ok"].as_bool() {
                outcomes.push(Outcome { success: ok });
            }
        }
    }
    Ok(outcomes)
}

/// Score every `.pgm` and `.md` artifact of `golden` against its namesake in `actual`.
pub fn evaluate_dirs(golden: &Path, actual: &Path) -> Result<EvalReport, EvalError> {
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for rel in collect(golden, &["pgm", "md"])? {
        let name = rel.to_string_lossy().replace('\\', "/");
        let (g, a) = (golden.join(&rel), actual.join(&rel));
        if !a.is_file() {
            missing.push(name);
            continue;
        }
        let mut score = PairScore { path: name, ..Default::default() };
        if rel.extension().is_some_and(|e| e == "pgm") {
            score_raster(&g, &a, &mut score);
        } else {
            score_text(&g, &a, &mut score)?;
        }
        pairs.push(score);
    }
    let outcomes = chart_outcomes(actual)?;
    Ok(EvalReport {
        pairs,
        missing,
        chart_runs: outcomes.len(),
        pass_at_1: pass_at_1(&outcomes).ok(),
        unavailable: UNAVAILABLE_METRICS.to_vec(),
        scale_note: "meteor and pass_at_1 are fractions in [0, 1]; multiply by 100 for percentage tables",
    })
}
