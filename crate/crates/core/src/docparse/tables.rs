use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub raw: String,
    pub value: Option<f64>,
    pub emphasis: bool,
    /// The numeric value was written with a `%` suffix (stored as given).
    pub percent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub caption: Option<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub source_doc: String,
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ParseNote {
    /// A body row whose cell count differs from the header; the row was dropped.
    RowArityMismatch {
        table: usize,
        row: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableExtraction {
    pub tables: Vec<Table>,
    pub notes: Vec<ParseNote>,
}

static NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+\-\u{2212}]?(?:\d+(?:\.\d*)?|\.\d+)%?$").unwrap());
static DELIMITER_CELL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^:?-+:?$").unwrap());
static CAPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\*\*|__)?\s*Table\s+\d+\s*[:.]").unwrap());

fn strip_emphasis(s: &str) -> (&str, bool) {
    let mut t = s.trim();
    let mut emphasized = false;
    loop {
        let inner = ["**", "__", "*", "_"].iter().find_map(|m| {
            (t.len() > 2 * m.len() && t.starts_with(m) && t.ends_with(m))
                .then(|| t[m.len()..t.len() - m.len()].trim())
        });
        match inner {
            Some(i) => {
                t = i;
                emphasized = true;
            }
            None => return (t, emphasized),
        }
    }
}

/// Parse one table cell: emphasis markers are stripped and flagged, and
/// signed decimals with an optional `%` suffix become numeric values.
pub fn parse_cell(raw: &str) -> Cell {
    let raw = raw.trim();
    let (inner, emphasis) = strip_emphasis(raw);
    let (value, percent) = if NUMERIC.is_match(inner) {
        let percent = inner.ends_with('%');
        let digits = inner.trim_end_matches('%').replace('\u{2212}', "-");
        let value = digits.parse::<f64>().ok().filter(|v| v.is_finite());
        (value, percent && value.is_some())
    } else {
        (None, false)
    };
    Cell {
        raw: raw.to_string(),
        value,
        emphasis,
        percent,
    }
}

fn split_row(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = if t.ends_with('|') && !t.ends_with("\\|") {
        &t[..t.len() - 1]
    } else {
        t
    };
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = t.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                cur.push('|');
                chars.next();
            }
            '|' => cells.push(std::mem::take(&mut cur).trim().to_string()),
            _ => cur.push(c),
        }
    }
    cells.push(cur.trim().to_string());
    cells
}

fn is_delimiter_row(line: &str) -> bool {
    let cells = split_row(line);
    !cells.is_empty() && cells.iter().all(|c| DELIMITER_CELL.is_match(c.trim()))
}

fn caption_text(line: &str) -> Option<String> {
    let t = line.trim();
    CAPTION.is_match(t).then(|| {
        let (inner, _) = strip_emphasis(t);
        inner.replace("**", "").trim().to_string()
    })
}

/// Extract every pipe table in `body`.
///
/// A table is a run of `|`-prefixed lines whose second line is a delimiter row.
/// The nearest non-blank line before (or, failing that, after) the table is
/// attached as caption when it reads `Table N:`. Rows whose arity differs from
/// the header are dropped and reported as notes.
pub fn extract_tables(source_doc: &str, body: &str) -> TableExtraction {
    let lines: Vec<&str> = body.lines().collect();
    let mut out = TableExtraction::default();
    let mut used_captions = std::collections::BTreeSet::new();
    let mut in_fence = false;
    let mut i = 0;

    while i < lines.len() {
        let t = lines[i].trim_start();
        if t.starts_with("```") || t.starts_with("~~~") {
            in_fence = !in_fence;
            i += 1;
            continue;
        }
        if in_fence || !t.starts_with('|') {
            i += 1;
            continue;
        }
        let start = i;
        while i < lines.len() && lines[i].trim_start().starts_with('|') {
            i += 1;
        }
        let block = &lines[start..i];
        if block.len() < 2 || !is_delimiter_row(block[1]) {
            continue;
        }

        let ordinal = out.tables.len();
        let headers: Vec<String> = split_row(block[0])
            .iter()
            .map(|h| strip_emphasis(h).0.to_string())
            .collect();
        let mut rows = Vec::new();
        for (row_idx, line) in block[2..].iter().enumerate() {
            let cells = split_row(line);
            if cells.len() != headers.len() {
                out.notes.push(ParseNote::RowArityMismatch {
                    table: ordinal,
                    row: row_idx,
                    expected: headers.len(),
                    found: cells.len(),
                });
                continue;
            }
            rows.push(cells.iter().map(|c| parse_cell(c)).collect());
        }

        let before = lines[..start]
            .iter()
            .enumerate()
            .rev()
            .find(|(_, l)| !l.trim().is_empty());
        let after = lines[i..]
            .iter()
            .enumerate()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| (i + k, l));
        let caption = [before, after]
            .into_iter()
            .flatten()
            .find_map(|(idx, l)| {
                if used_captions.contains(&idx) {
                    return None;
                }
                caption_text(l).map(|c| (idx, c))
            })
            .map(|(idx, c)| {
                used_captions.insert(idx);
                c
            });

        out.tables.push(Table {
            caption,
            headers,
            rows,
            source_doc: source_doc.to_string(),
            ordinal,
        });
    }
    out
}

fn escape_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

impl Table {
    /// Normalized pipe-table markdown, caption line first when present.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.caption {
            out.push_str(c);
            out.push_str("\n\n");
        }
        let row = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
        out.push_str(&row(self.headers.iter().map(|h| escape_cell(h)).collect()));
        out.push_str(&row(self.headers.iter().map(|_| "---".to_string()).collect()));
        for r in &self.rows {
            out.push_str(&row(r.iter().map(|c| escape_cell(&c.raw)).collect()));
        }
        out
    }

    pub fn numeric_cell_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.value.is_some()).count()
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<&Cell> {
        self.rows.get(row)?.get(column)
    }
}

pub fn tables_to_markdown(tables: &[Table]) -> String {
    tables
        .iter()
        .map(Table::to_markdown)
        .collect::<Vec<_>>()
        .join("\n")
}
