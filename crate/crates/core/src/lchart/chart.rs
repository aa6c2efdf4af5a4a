use serde::{Deserialize, Serialize};

use super::{Direction, ExperimentChain, LchartError};
use crate::render::{text_width, Anchor, Figure, Scene, Shape, Stroke};

const CANVAS_W: f64 = 1024.0;
const CANVAS_H: f64 = 768.0;
const PLOT_LEFT: f64 = 90.0;
const PLOT_RIGHT: f64 = 760.0;
const PLOT_TOP: f64 = 70.0;
const PLOT_BOTTOM: f64 = 690.0;
const Y_TICKS: usize = 5;
const SERIES_GRAYS: [f64; 4] = [0.0, 0.3, 0.5, 0.15];
const SERIES_DASHES: [Option<(f64, f64)>; 3] = [None, Some((8.0, 4.0)), Some((2.0, 3.0))];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub ticks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSeries {
    pub legend: String,
    pub direction: Direction,
    pub points: Vec<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub title: String,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<ChartSeries>,
}

/// Year ticks spanning min..max; y range padded by 5% of the value span
/// (span 1 when all values are equal). Direction arrows go on the y label
/// and every legend entry.
pub fn build_chart_spec(chain: &ExperimentChain) -> Result<ChartSpec, LchartError> {
    let points = chain.series.iter().flat_map(|s| &s.points);
    if chain.series.iter().all(|s| s.points.is_empty()) {
        return Err(LchartError::EmptyChain);
    }
    let min_year = points.clone().map(|p| p.year).min().unwrap();
    let max_year = points.clone().map(|p| p.year).max().unwrap();
    let min_v = points.clone().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let max_v = points.map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    if !min_v.is_finite() || !max_v.is_finite() {
        return Err(LchartError::InvalidValue("non-finite observation in chain".into()));
    }
    let span = if max_v > min_v { max_v - min_v } else { 1.0 };
    let (y_min, y_max) = (min_v - 0.05 * span, max_v + 0.05 * span);

    let mut metric_labels: Vec<String> = Vec::new();
    for s in &chain.series {
        let l = format!("{}{}", s.metric, s.direction.arrow());
        if !metric_labels.contains(&l) {
            metric_labels.push(l);
        }
    }

    let series = chain
        .series
        .iter()
        .filter(|s| !s.points.is_empty())
        .map(|s| ChartSeries {
            legend: format!("{}{} ({})", s.metric, s.direction.arrow(), s.dataset),
            direction: s.direction,
            points: s
                .points
                .iter()
                .map(|p| ChartPoint { x: p.year as f64, y: p.value, label: p.model.clone() })
                .collect(),
        })
        .collect();

    let y_ticks = (0..Y_TICKS)
        .map(|i| y_min + (y_max - y_min) * i as f64 / (Y_TICKS - 1) as f64)
        .collect();

    Ok(ChartSpec {
        title: format!("{}: results over time", chain.cluster_id),
        x_axis: Axis {
            label: "Year".into(),
            min: min_year as f64,
            max: max_year as f64,
            ticks: (min_year..=max_year).map(f64::from).collect(),
        },
        y_axis: Axis { label: metric_labels.join(", "), min: y_min, max: y_max, ticks: y_ticks },
        series,
    })
}

fn check(spec: &ChartSpec) -> Result<(), LchartError> {
    let bad = |what: &str| Err(LchartError::InvalidValue(what.to_string()));
    let axes = [&spec.x_axis, &spec.y_axis];
    if axes.iter().any(|a| !a.min.is_finite() || !a.max.is_finite() || a.ticks.iter().any(|t| !t.is_finite())) {
        return bad("non-finite axis bound or tick");
    }
    if spec.y_axis.min >= spec.y_axis.max || spec.x_axis.min > spec.x_axis.max {
        return bad("empty axis range");
    }
    for s in &spec.series {
        for p in &s.points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return bad(&format!("point {:?} in series {}", (p.x, p.y), s.legend));
            }
        }
    }
    Ok(())
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

/// Draw the spec on a fixed 1024×768 vector canvas; the raster is resampled to `raster`.
pub fn render_linechart(spec: &ChartSpec, raster: (usize, usize)) -> Result<Figure, LchartError> {
    check(spec)?;
    let mut scene = Scene::new(CANVAS_W, CANVAS_H);
    let x_span = spec.x_axis.max - spec.x_axis.min;
    let px = |x: f64| {
        if x_span == 0.0 {
            (PLOT_LEFT + PLOT_RIGHT) / 2.0
        } else {
            PLOT_LEFT + 20.0 + (x - spec.x_axis.min) / x_span * (PLOT_RIGHT - PLOT_LEFT - 40.0)
        }
    };
    let py = |y: f64| PLOT_BOTTOM - (y - spec.y_axis.min) / (spec.y_axis.max - spec.y_axis.min) * (PLOT_BOTTOM - PLOT_TOP);
    let axis = Stroke::solid(0.0, 1.5);
    let grid = Stroke { gray: 0.85, width: 1.0, dash: Some((3.0, 3.0)) };

    scene.push(Shape::Text { x: CANVAS_W / 2.0, y: 36.0, text: spec.title.clone(), size: 18.0, anchor: Anchor::Middle, gray: 0.0, bold: true });

    for &t in &spec.y_axis.ticks {
        let y = py(t);
        scene.push(Shape::Line { x1: PLOT_LEFT, y1: y, x2: PLOT_RIGHT, y2: y, stroke: grid.clone() });
        scene.push(Shape::Line { x1: PLOT_LEFT - 5.0, y1: y, x2: PLOT_LEFT, y2: y, stroke: axis.clone() });
        scene.push(Shape::Text { x: PLOT_LEFT - 8.0, y: y + 4.0, text: tick_label(t), size: 11.0, anchor: Anchor::End, gray: 0.0, bold: false });
    }
    for &t in &spec.x_axis.ticks {
        let x = px(t);
        scene.push(Shape::Line { x1: x, y1: PLOT_BOTTOM, x2: x, y2: PLOT_BOTTOM + 5.0, stroke: axis.clone() });
        scene.push(Shape::Text { x, y: PLOT_BOTTOM + 20.0, text: format!("{t:.0}"), size: 11.0, anchor: Anchor::Middle, gray: 0.0, bold: false });
    }
    scene.push(Shape::Line { x1: PLOT_LEFT, y1: PLOT_BOTTOM, x2: PLOT_RIGHT, y2: PLOT_BOTTOM, stroke: axis.clone() });
    scene.push(Shape::Line { x1: PLOT_LEFT, y1: PLOT_TOP, x2: PLOT_LEFT, y2: PLOT_BOTTOM, stroke: axis.clone() });
    scene.push(Shape::Text { x: (PLOT_LEFT + PLOT_RIGHT) / 2.0, y: PLOT_BOTTOM + 48.0, text: spec.x_axis.label.clone(), size: 13.0, anchor: Anchor::Middle, gray: 0.0, bold: false });
    scene.push(Shape::Text { x: PLOT_LEFT, y: PLOT_TOP - 12.0, text: spec.y_axis.label.clone(), size: 13.0, anchor: Anchor::Start, gray: 0.0, bold: false });

    for (i, s) in spec.series.iter().enumerate() {
        let stroke = Stroke { gray: SERIES_GRAYS[i % SERIES_GRAYS.len()], width: 2.0, dash: SERIES_DASHES[i % SERIES_DASHES.len()] };
        let pts: Vec<(f64, f64)> = s.points.iter().map(|p| (px(p.x), py(p.y))).collect();
        if pts.len() > 1 {
            scene.push(Shape::Polyline { points: pts.clone(), stroke: stroke.clone() });
        }
        for ((x, y), p) in pts.iter().zip(&s.points) {
            scene.push(Shape::Circle { cx: *x, cy: *y, r: 4.0, fill: stroke.gray, stroke: None });
            scene.push(Shape::Text { x: *x, y: y - 9.0, text: p.label.clone(), size: 10.0, anchor: Anchor::Middle, gray: 0.25, bold: false });
        }

        let ly = PLOT_TOP + 10.0 + i as f64 * 22.0;
        let lx = PLOT_RIGHT + 24.0;
        scene.push(Shape::Line { x1: lx, y1: ly, x2: lx + 28.0, y2: ly, stroke: stroke.clone() });
        scene.push(Shape::Circle { cx: lx + 14.0, cy: ly, r: 4.0, fill: stroke.gray, stroke: None });
        let max_chars = ((CANVAS_W - lx - 40.0) / text_width("x", 11.0)) as usize;
        let legend: String = s.legend.chars().take(max_chars).collect();
        scene.push(Shape::Text { x: lx + 36.0, y: ly + 4.0, text: legend, size: 11.0, anchor: Anchor::Start, gray: 0.0, bold: false });
    }

    Ok(Figure::from_scene(&scene, raster.0, raster.1))
}
