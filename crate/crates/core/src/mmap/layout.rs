use chrono::Datelike;
use serde::Serialize;

use super::{MethodChain, MmapError};
use crate::render::{text_width, Anchor, Figure, Scene, Shape, Stroke};
use crate::text::wrap;

/// Label wrap width, in characters.
pub const WRAP_WIDTH: usize = 60;
const MAX_METHOD_LINES: usize = 3;
const FONT: f64 = 12.0;
const LINE_HEIGHT: f64 = 16.0;
const PAD: f64 = 8.0;
const MARGIN: f64 = 24.0;
const COLUMN_GAP: f64 = 48.0;
const LEAF_INDENT: f64 = 20.0;
const LEAF_GAP: f64 = 14.0;
const ROW_GAP: f64 = 28.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Root,
    Year(i32),
    Leaf(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutNode {
    pub kind: NodeKind,
    pub lines: Vec<String>,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl LayoutNode {
    fn new(kind: NodeKind, lines: Vec<String>) -> Self {
        let widest = lines.iter().map(|l| text_width(l, FONT)).fold(0.0, f64::max);
        let h = lines.len() as f64 * LINE_HEIGHT + 2.0 * PAD - 4.0;
        Self { kind, lines, x: 0.0, y: 0.0, w: widest + 2.0 * PAD, h }
    }

    /// Strict overlap test; touching edges do not count.
    pub fn overlaps(&self, other: &LayoutNode) -> bool {
        self.x < other.x + other.w && other.x < self.x + self.w && self.y < other.y + other.h && other.y < self.y + self.h
    }

    fn right_mid(&self) -> (f64, f64) {
        (self.x + self.w, self.y + self.h / 2.0)
    }

    fn left_mid(&self) -> (f64, f64) {
        (self.x, self.y + self.h / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MindMapLayout {
    pub nodes: Vec<LayoutNode>,
    pub edges: Vec<[(f64, f64); 2]>,
    pub width: f64,
    pub height: f64,
}

fn leaf_lines(title: &str, date: &str, method: &str) -> Vec<String> {
    let mut lines = wrap(&format!("{title} ({date})"), WRAP_WIDTH);
    let mut method_lines = wrap(&format!("Method: {method}"), WRAP_WIDTH);
    if method_lines.len() > MAX_METHOD_LINES {
        method_lines.truncate(MAX_METHOD_LINES);
        let last = method_lines.last_mut().unwrap();
        let keep: String = last.chars().take(WRAP_WIDTH - 2).collect();
        *last = format!("{} …", keep.trim_end());
    }
    lines.extend(method_lines);
    lines
}

/// Left-to-right timeline: the root sits at the left of a top row of year
/// nodes; each year's papers are stacked beneath it, indented off a spine.
pub fn layout_mindmap(chain: &MethodChain) -> Result<MindMapLayout, MmapError> {
    if chain.pairs.is_empty() {
        return Err(MmapError::EmptyChain);
    }
    let mut root = LayoutNode::new(NodeKind::Root, wrap(&chain.label, WRAP_WIDTH));

    let mut groups: Vec<(i32, Vec<LayoutNode>)> = Vec::new();
    for p in &chain.pairs {
        let year = p.published_at.year();
        let leaf = LayoutNode::new(
            NodeKind::Leaf(p.doc_id.clone()),
            leaf_lines(&p.title, &p.published_at.format("%Y-%m-%d").to_string(), &p.method),
        );
        match groups.last_mut() {
            Some((y, leaves)) if *y == year => leaves.push(leaf),
            _ => groups.push((year, vec![leaf])),
        }
    }

    let year_h = LayoutNode::new(NodeKind::Year(0), vec!["0000".into()]).h;
    let row_h = root.h.max(year_h);
    root.x = MARGIN;
    root.y = MARGIN + (row_h - root.h) / 2.0;

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut x = root.x + root.w + COLUMN_GAP;
    let mut bottom = root.y + root.h;
    let mut prev_anchor = root.right_mid();

    for (year, leaves) in groups {
        let mut year_node = LayoutNode::new(NodeKind::Year(year), vec![year.to_string()]);
        year_node.x = x;
        year_node.y = MARGIN + (row_h - year_node.h) / 2.0;
        edges.push([prev_anchor, year_node.left_mid()]);
        prev_anchor = year_node.right_mid();

        let spine_x = x + LEAF_INDENT / 2.0;
        let mut y = MARGIN + row_h + ROW_GAP;
        let mut col_w = year_node.w;
        let mut last_mid = year_node.y + year_node.h;
        for mut leaf in leaves {
            leaf.x = x + LEAF_INDENT;
            leaf.y = y;
            y += leaf.h + LEAF_GAP;
            col_w = col_w.max(LEAF_INDENT + leaf.w);
            let mid = leaf.left_mid();
            edges.push([(spine_x, mid.1), mid]);
            last_mid = mid.1;
            bottom = bottom.max(leaf.y + leaf.h);
            nodes.push(leaf);
        }
        edges.push([(spine_x, year_node.y + year_node.h), (spine_x, last_mid)]);
        nodes.push(year_node);
        x += col_w + COLUMN_GAP;
    }
    nodes.insert(0, root);

    Ok(MindMapLayout {
        nodes,
        edges,
        width: x - COLUMN_GAP + MARGIN,
        height: bottom + MARGIN,
    })
}

impl MindMapLayout {
    pub fn to_scene(&self) -> Scene {
        let mut scene = Scene::new(self.width, self.height);
        for [a, b] in &self.edges {
            scene.push(Shape::Line { x1: a.0, y1: a.1, x2: b.0, y2: b.1, stroke: Stroke::solid(0.45, 1.5) });
        }
        for node in &self.nodes {
            let (fill, stroke_gray, bold) = match node.kind {
                NodeKind::Root => (0.82, 0.0, true),
                NodeKind::Year(_) => (0.9, 0.2, true),
                NodeKind::Leaf(_) => (0.97, 0.35, false),
            };
            scene.push(Shape::Rect {
                x: node.x,
                y: node.y,
                w: node.w,
                h: node.h,
                fill: Some(fill),
                stroke: Some(Stroke::solid(stroke_gray, 1.0)),
            });
            for (i, line) in node.lines.iter().enumerate() {
                scene.push(Shape::Text {
                    x: node.x + PAD,
                    y: node.y + PAD + FONT - 2.0 + i as f64 * LINE_HEIGHT,
                    text: line.clone(),
                    size: FONT,
                    anchor: Anchor::Start,
                    gray: 0.0,
                    bold: bold || (matches!(node.kind, NodeKind::Leaf(_)) && i == 0),
                });
            }
        }
        scene
    }
}

/// Lay out and draw the chain; the raster is `raster` pixels (width, height).
pub fn render_mindmap(chain: &MethodChain, raster: (usize, usize)) -> Result<Figure, MmapError> {
    let layout = layout_mindmap(chain)?;
    Ok(Figure::from_scene(&layout.to_scene(), raster.0, raster.1))
}
