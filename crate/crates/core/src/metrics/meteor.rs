//! METEOR with exact and stem matchers (no synonym stage).

use std::sync::LazyLock;

use super::MetricError;

const MIN_STEM: usize = 3;

static STEM_RULES: LazyLock<Vec<(String, String)>> = LazyLock::new(|| {
    include_str!("../../data/stem_rules.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split_whitespace();
            let suffix = parts.next().unwrap_or_default().to_string();
            let replacement = parts.next().unwrap_or_default().to_string();
            (suffix, replacement)
        })
        .collect()
});

/// Suffix-strip stemmer driven by the shipped rule table.
pub fn stem(word: &str) -> String {
    for (suffix, replacement) in STEM_RULES.iter() {
        if let Some(base) = word.strip_suffix(suffix.as_str()) {
            if base.chars().count() >= MIN_STEM {
                return format!("{base}{replacement}");
            }
        }
    }
    word.to_string()
}

/// Greedy one-to-one alignment for one matcher stage. Among equal reference
/// tokens, the one continuing the previous match is preferred (fewer chunks).
fn align_stage(
    cand: &[String],
    refs: &[String],
    cand_match: &mut [Option<usize>],
    ref_used: &mut [bool],
) {
    for i in 0..cand.len() {
        if cand_match[i].is_some() {
            continue;
        }
        let continues = i
            .checked_sub(1)
            .and_then(|p| cand_match[p])
            .map(|r| r + 1)
            .filter(|&r| r < refs.len() && !ref_used[r] && refs[r] == cand[i]);
        let chosen = continues.or_else(|| (0..refs.len()).find(|&r| !ref_used[r] && refs[r] == cand[i]));
        if let Some(r) = chosen {
            cand_match[i] = Some(r);
            ref_used[r] = true;
        }
    }
}

/// METEOR over lowercased alphanumeric unigrams.
///
/// `F_mean = 10PR / (R + 9P)`, `penalty = 0.5 · (chunks / matches)^3`,
/// `score = F_mean · (1 − penalty)`.
pub fn meteor_score(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let cand = crate::text::tokenize(candidate);
    let refs = crate::text::tokenize(reference);
    if cand.is_empty() || refs.is_empty() {
        return Err(MetricError::EmptyInput);
    }

    let mut cand_match = vec![None; cand.len()];
    let mut ref_used = vec![false; refs.len()];
    align_stage(&cand, &refs, &mut cand_match, &mut ref_used);
    let cand_stems: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let ref_stems: Vec<String> = refs.iter().map(|w| stem(w)).collect();
    align_stage(&cand_stems, &ref_stems, &mut cand_match, &mut ref_used);

    let matches = cand_match.iter().flatten().count();
    if matches == 0 {
        return Ok(0.0);
    }
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for (i, m) in cand_match.iter().enumerate() {
        match (m, prev) {
            (Some(r), Some((pi, pr))) if i == pi + 1 && *r == pr + 1 => prev = Some((i, *r)),
            (Some(r), _) => {
                chunks += 1;
                prev = Some((i, *r));
            }
            (None, _) => prev = None,
        }
    }

    let m = matches as f64;
    let precision = m / cand.len() as f64;
    let recall = m / refs.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    Ok(f_mean * (1.0 - penalty))
}
