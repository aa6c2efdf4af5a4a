use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{CellSource, Direction, ExperimentRecord, LchartError};
use crate::corpus::{MAX_YEAR, MIN_YEAR};

/// Dataset name used when a table does not name one.
pub const DEFAULT_DATASET: &str = "default";

/// One contributing observation of a trend point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub value: f64,
    pub source: CellSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub year: i32,
    pub model: String,
    pub value: f64,
    /// The kept observation first, then every observation it superseded.
    pub provenance: Vec<Provenance>,
    /// Contributing observations disagreed on the value.
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub metric: String,
    pub dataset: String,
    pub direction: Direction,
    pub points: Vec<TrendPoint>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignStats {
    pub total: usize,
    pub kept: usize,
    pub deduped: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentChain {
    pub cluster_id: String,
    pub series: Vec<TrendSeries>,
    pub stats: AlignStats,
}

/// (metric key, dataset key, direction)
type GroupKey = (String, String, Direction);
/// (display metric, display dataset, candidates)
type Group = (String, String, Vec<Candidate>);

struct Candidate {
    year: i32,
    provenance: Provenance,
}

/// Group observations by (metric, dataset, direction) and place each on the
/// time axis: a cited baseline takes its reference year, anything else the
/// host paper's year. Per year the best value by direction is kept (ties:
/// model name, then source); every other observation of that year is
/// recorded in the kept point's provenance.
pub fn align_chain(cluster_id: &str, records: &[ExperimentRecord]) -> Result<ExperimentChain, LchartError> {
    let mut records: Vec<&ExperimentRecord> = records.iter().collect();
    records.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut stats = AlignStats::default();
    let mut groups: BTreeMap<GroupKey, Group> = BTreeMap::new();
    for rec in records {
        for obs in &rec.observations {
            stats.total += 1;
            let year = rec
                .baseline_years
                .get(&obs.model)
                .copied()
                .unwrap_or_else(|| rec.published_at.year());
            if !(MIN_YEAR..=MAX_YEAR).contains(&year) || !obs.value.is_finite() {
                stats.skipped += 1;
                continue;
            }
            let dataset = obs.dataset.clone().unwrap_or_else(|| DEFAULT_DATASET.to_string());
            let key = (obs.metric.trim().to_lowercase(), dataset.trim().to_lowercase(), obs.direction);
            let entry = groups
                .entry(key)
                .or_insert_with(|| (obs.metric.trim().to_string(), dataset.trim().to_string(), Vec::new()));
            entry.2.push(Candidate {
                year,
                provenance: Provenance { model: obs.model.clone(), value: obs.value, source: obs.source.clone() },
            });
        }
    }

    let mut series = Vec::new();
    for ((_, _, direction), (metric, dataset, candidates)) in groups {
        let mut by_year: BTreeMap<i32, Vec<Provenance>> = BTreeMap::new();
        for c in candidates {
            by_year.entry(c.year).or_default().push(c.provenance);
        }
        let points: Vec<TrendPoint> = by_year
            .into_iter()
            .map(|(year, mut provs)| {
                provs.sort_by(|a, b| {
                    if direction.better(a.value, b.value) {
                        std::cmp::Ordering::Less
                    } else if direction.better(b.value, a.value) {
                        std::cmp::Ordering::Greater
                    } else {
                        a.model.cmp(&b.model).then_with(|| a.source.cmp(&b.source))
                    }
                });
                stats.kept += 1;
                stats.deduped += provs.len() - 1;
                let best = &provs[0];
                TrendPoint {
                    year,
                    model: best.model.clone(),
                    value: best.value,
                    conflict: provs.iter().any(|p| p.value != best.value),
                    provenance: provs,
                }
            })
            .collect();
        series.push(TrendSeries { metric, dataset, direction, points });
    }

    if stats.kept == 0 {
        return Err(LchartError::EmptyChain);
    }
    Ok(ExperimentChain { cluster_id: cluster_id.to_string(), series, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docparse::extract_tables;
    use crate::lchart::MetricObservation;
    use chrono::NaiveDate;

    fn record(doc: &str, year: i32, obs: &[(&str, &str, &str, f64)], baselines: &[(&str, i32)]) -> ExperimentRecord {
        ExperimentRecord {
            doc_id: doc.into(),
            published_at: NaiveDate::from_ymd_opt(year, 6, 1).unwrap(),
            table: extract_tables(doc, "| a |\n|---|\n| 1 |\n").tables[0].clone(),
            models: obs.iter().map(|o| o.0.to_string()).collect(),
            observations: obs
                .iter()
                .enumerate()
                .map(|(i, (model, metric, dataset, value))| MetricObservation {
                    model: model.to_string(),
                    metric: metric.to_string(),
                    dataset: Some(dataset.to_string()),
                    value: *value,
                    direction: Direction::infer(metric),
                    source: CellSource { doc_id: doc.into(), table: 0, row: i, column: 1 },
                })
                .collect(),
            baseline_years: baselines.iter().map(|(m, y)| (m.to_string(), *y)).collect(),
            notes: vec![],
            repair_count: 0,
        }
    }

    #[test]
    fn three_papers_one_series() {
        let recs = vec![
            record("p3", 2020, &[("C", "Top-1", "ImageNet", 80.0)], &[]),
            record("p1", 2016, &[("A", "Top-1", "ImageNet", 76.0)], &[]),
            record("p2", 2018, &[("B", "Top-1", "ImageNet", 78.0)], &[]),
        ];
        let chain = align_chain("c", &recs).unwrap();
        assert_eq!(chain.series.len(), 1);
        let years: Vec<_> = chain.series[0].points.iter().map(|p| p.year).collect();
        assert_eq!(years, vec![2016, 2018, 2020]);
    }

    #[test]
    fn duplicate_model_year_keeps_better() {
        let recs = vec![
            record("p1", 2017, &[("ResNet", "Top-1", "ImageNet", 76.1)], &[("ResNet", 2016)]),
            record("p2", 2019, &[("ResNet", "Top-1", "ImageNet", 76.4)], &[("ResNet", 2016)]),
        ];
        let chain = align_chain("c", &recs).unwrap();
        let p = &chain.series[0].points[0];
        assert_eq!((p.year, p.value), (2016, 76.4));
        assert_eq!(p.provenance.len(), 2);
        assert!(p.conflict);
        assert_eq!(chain.stats, AlignStats { total: 2, kept: 1, deduped: 1, skipped: 0 });
    }

    #[test]
    fn lower_better_keeps_smaller() {
        let recs = vec![
            record("p1", 2020, &[("A", "FID", "COCO", 9.0)], &[]),
            record("p2", 2020, &[("B", "FID", "COCO", 7.0)], &[]),
        ];
        let chain = align_chain("c", &recs).unwrap();
        assert_eq!(chain.series[0].points[0].model, "B");
    }

    #[test]
    fn disjoint_datasets_stay_apart() {
        let recs = vec![record("p1", 2020, &[("A", "Top-1", "ImageNet", 70.0), ("A", "Top-1", "CIFAR", 90.0)], &[])];
        assert_eq!(align_chain("c", &recs).unwrap().series.len(), 2);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(align_chain("c", &[record("p", 2020, &[], &[])]), Err(LchartError::EmptyChain)));
    }
}
