//! A small retained scene of grayscale primitives, emitted as SVG and
//! rasterized into a [`GrayImage`]. Both outputs are byte-deterministic.

use std::fmt::Write;

use crate::metrics::GrayImage;

/// Monospace advance per character, as a fraction of the font size.
pub const CHAR_ADVANCE: f64 = 0.6;

pub fn text_width(text: &str, size: f64) -> f64 {
    text.chars().count() as f64 * size * CHAR_ADVANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Start,
    Middle,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    /// Intensity in [0, 1]; 0 is black.
    pub gray: f64,
    pub width: f64,
    pub dash: Option<(f64, f64)>,
}

impl Stroke {
    pub fn solid(gray: f64, width: f64) -> Self {
        Self { gray, width, dash: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { x: f64, y: f64, w: f64, h: f64, fill: Option<f64>, stroke: Option<Stroke> },
    Line { x1: f64, y1: f64, x2: f64, y2: f64, stroke: Stroke },
    Polyline { points: Vec<(f64, f64)>, stroke: Stroke },
    Circle { cx: f64, cy: f64, r: f64, fill: f64, stroke: Option<Stroke> },
    /// `y` is the baseline.
    Text { x: f64, y: f64, text: String, size: f64, anchor: Anchor, gray: f64, bold: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: f64,
    pub height: f64,
    pub background: f64,
    pub shapes: Vec<Shape>,
}

fn num(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    let r = if r == 0.0 { 0.0 } else { r };
    let s = format!("{r:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn color(gray: f64) -> String {
    let v = (gray.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

fn stroke_attrs(s: &Stroke) -> String {
    let mut a = format!(" stroke=\"{}\" stroke-width=\"{}\"", color(s.gray), num(s.width));
    if let Some((on, off)) = s.dash {
        let _ = write!(a, " stroke-dasharray=\"{},{}\"", num(on), num(off));
    }
    a
}

impl Scene {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height, background: 1.0, shapes: Vec::new() }
    }

    pub fn push(&mut self, shape: Shape) {
        self.shapes.push(shape);
    }

    pub fn to_svg(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"monospace\">",
            w = num(self.width),
            h = num(self.height)
        );
        let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"{}\"/>", num(self.width), num(self.height), color(self.background));
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x, y, w, h, fill, stroke } => {
                    let fill = fill.map_or("none".to_string(), color);
                    let stroke = stroke.as_ref().map_or(String::new(), stroke_attrs);
                    let _ = writeln!(
                        out,
                        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"4\" fill=\"{fill}\"{stroke}/>",
                        num(*x), num(*y), num(*w), num(*h)
                    );
                }
                Shape::Line { x1, y1, x2, y2, stroke } => {
                    let _ = writeln!(
                        out,
                        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"{}/>",
                        num(*x1), num(*y1), num(*x2), num(*y2), stroke_attrs(stroke)
                    );
                }
                Shape::Polyline { points, stroke } => {
                    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
                    let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\"{}/>", pts.join(" "), stroke_attrs(stroke));
                }
                Shape::Circle { cx, cy, r, fill, stroke } => {
                    let stroke = stroke.as_ref().map_or(String::new(), stroke_attrs);
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"{stroke}/>",
                        num(*cx), num(*cy), num(*r), color(*fill)
                    );
                }
                Shape::Text { x, y, text, size, anchor, gray, bold } => {
                    let anchor = match anchor {
                        Anchor::Start => "start",
                        Anchor::Middle => "middle",
                        Anchor::End => "end",
                    };
                    let weight = if *bold { " font-weight=\"bold\"" } else { "" };
                    let _ = writeln!(
                        out,
                        "<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{anchor}\" fill=\"{}\"{weight}>{}</text>",
                        num(*x), num(*y), num(*size), color(*gray), escape(text)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }

    /// Rasterize at `width`×`height`, scaling uniformly and centring the scene.
    /// Text is drawn as solid bars per word.
    pub fn rasterize(&self, width: usize, height: usize) -> GrayImage {
        let scale = (width as f64 / self.width).min(height as f64 / self.height);
        let ox = (width as f64 - self.width * scale) / 2.0;
        let oy = (height as f64 - self.height * scale) / 2.0;
        let mut r = Raster { img: GrayImage::filled(width, height, self.background), scale, ox, oy };
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x, y, w, h, fill, stroke } => {
                    if let Some(f) = fill {
                        r.fill_rect(*x, *y, *w, *h, *f);
                    }
                    if let Some(s) = stroke {
                        let corners = [(*x, *y), (x + w, *y), (x + w, y + h), (*x, y + h), (*x, *y)];
                        for pair in corners.windows(2) {
                            r.segment(pair[0], pair[1], s);
                        }
                    }
                }
                Shape::Line { x1, y1, x2, y2, stroke } => r.segment((*x1, *y1), (*x2, *y2), stroke),
                Shape::Polyline { points, stroke } => {
                    for pair in points.windows(2) {
                        r.segment(pair[0], pair[1], stroke);
                    }
                }
                Shape::Circle { cx, cy, r: radius, fill, stroke } => {
                    r.disc(*cx, *cy, *radius, *fill);
                    if let Some(s) = stroke {
                        r.ring(*cx, *cy, *radius, s);
                    }
                }
                Shape::Text { x, y, text, size, anchor, gray, bold } => {
                    let w = text_width(text, *size);
                    let start = match anchor {
                        Anchor::Start => *x,
                        Anchor::Middle => x - w / 2.0,
                        Anchor::End => x - w,
                    };
                    let bar_h = size * if *bold { 0.6 } else { 0.45 };
                    let advance = size * CHAR_ADVANCE;
                    let mut col = 0usize;
                    for word in text.split(' ') {
                        let n = word.chars().count();
                        if n > 0 {
                            let wx = start + col as f64 * advance;
                            r.fill_rect(wx, y - bar_h - size * 0.1, n as f64 * advance - advance * 0.2, bar_h, *gray);
                        }
                        col += n + 1;
                    }
                }
            }
        }
        r.img
    }
}

struct Raster {
    img: GrayImage,
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Raster {
    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        (self.ox + x * self.scale, self.oy + y * self.scale)
    }

    fn span(&self, lo: f64, hi: f64, limit: usize) -> std::ops::Range<usize> {
        let a = lo.floor().max(0.0) as usize;
        let b = (hi.ceil().max(0.0) as usize).min(limit);
        a.min(b)..b
    }

    fn fill_rect(&mut self, x: f64, y: f64, w: f64, h: f64, gray: f64) {
        let (x0, y0) = self.to_px(x, y);
        let (x1, y1) = self.to_px(x + w, y + h);
        for py in self.span(y0, y1, self.img.height()) {
            let cy = py as f64 + 0.5;
            if cy < y0 || cy > y1 {
                continue;
            }
            for px in self.span(x0, x1, self.img.width()) {
                let cx = px as f64 + 0.5;
                if cx >= x0 && cx <= x1 {
                    self.img.set(px, py, gray);
                }
            }
        }
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), stroke: &Stroke) {
        let (ax, ay) = self.to_px(a.0, a.1);
        let (bx, by) = self.to_px(b.0, b.1);
        let half = (stroke.width * self.scale / 2.0).max(0.5);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let len = len2.sqrt();
        let dash = stroke.dash.map(|(on, off)| (on * self.scale, (on + off) * self.scale));
        for py in self.span(ay.min(by) - half, ay.max(by) + half, self.img.height()) {
            for px in self.span(ax.min(bx) - half, ax.max(bx) + half, self.img.width()) {
                let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
                let t = if len2 == 0.0 { 0.0 } else { (((cx - ax) * dx + (cy - ay) * dy) / len2).clamp(0.0, 1.0) };
                let (nx, ny) = (ax + t * dx, ay + t * dy);
                if (cx - nx).hypot(cy - ny) > half {
                    continue;
                }
                if let Some((on, period)) = dash {
                    if period > 0.0 && (t * len) % period > on {
                        continue;
                    }
                }
                self.img.set(px, py, stroke.gray);
            }
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, r: f64, gray: f64) {
        let (pcx, pcy) = self.to_px(cx, cy);
        let pr = (r * self.scale).max(0.5);
        for py in self.span(pcy - pr, pcy + pr, self.img.height()) {
            for px in self.span(pcx - pr, pcx + pr, self.img.width()) {
                if (px as f64 + 0.5 - pcx).hypot(py as f64 + 0.5 - pcy) <= pr {
                    self.img.set(px, py, gray);
                }
            }
        }
    }

    fn ring(&mut self, cx: f64, cy: f64, r: f64, stroke: &Stroke) {
        let (pcx, pcy) = self.to_px(cx, cy);
        let pr = r * self.scale;
        let half = (stroke.width * self.scale / 2.0).max(0.5);
        for py in self.span(pcy - pr - half, pcy + pr + half, self.img.height()) {
            for px in self.span(pcx - pr - half, pcx + pr + half, self.img.width()) {
                let d = (px as f64 + 0.5 - pcx).hypot(py as f64 + 0.5 - pcy);
                if (d - pr).abs() <= half {
                    self.img.set(px, py, stroke.gray);
                }
            }
        }
    }
}


/// A rendered figure: SVG text plus its grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub svg: String,
    pub raster: GrayImage,
}

impl Figure {
    pub fn from_scene(scene: &Scene, raster_width: usize, raster_height: usize) -> Self {
        Self { svg: scene.to_svg(), raster: scene.rasterize(raster_width, raster_height) }
    }
}
