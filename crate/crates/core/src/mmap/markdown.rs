use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use super::MethodChain;

const MOTIVATION: &str = "- Motivation: ";
const METHOD: &str = "- Method: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    SchemaViolation { node: String, detail: String },
    DuplicateNode { node: String },
    YearOrder { previous: i32, found: i32 },
}

/// Single-line inline text with markdown control characters escaped.
fn escape_inline(s: &str) -> String {
    let collapsed = crate::text::collapse_whitespace(s);
    let escaped = collapsed.replace('\\', "\\\\").replace('#', "\\#");
    if escaped.starts_with('-') {
        format!("\\{escaped}")
    } else {
        escaped
    }
}

/// Root heading, `## <year>` groups, then one `### <title> (<date>)` node per
/// paper with Motivation and Method bullets. Ends with exactly one newline.
pub fn emit_chain_markdown(chain: &MethodChain) -> String {
    let label = if chain.label.trim().is_empty() { &chain.cluster_id } else { &chain.label };
    let mut blocks: Vec<String> = vec![format!("# {}", escape_inline(label))];
    let mut current_year = None;
    for p in &chain.pairs {
        let year = p.published_at.year();
        if current_year != Some(year) {
            blocks.push(format!("## {year}"));
            current_year = Some(year);
        }
        let title = if p.title.trim().is_empty() { &p.doc_id } else { &p.title };
        blocks.push(format!("### {} ({})", escape_inline(title), p.published_at.format("%Y-%m-%d")));
        blocks.push(format!(
            "{MOTIVATION}{}\n{METHOD}{}",
            escape_inline(&p.motivation),
            escape_inline(&p.method)
        ));
    }
    let mut out = blocks.join("\n\n");
    out.push('\n');
    out
}

struct PaperNode {
    heading: String,
    motivation: usize,
    method: usize,
}

fn finish(node: Option<PaperNode>, violations: &mut Vec<Violation>) {
    let Some(node) = node else { return };
    for (name, count) in [("Motivation", node.motivation), ("Method", node.method)] {
        if count != 1 {
            violations.push(Violation::SchemaViolation {
                node: node.heading.clone(),
                detail: format!("expected one {name} bullet, found {count}"),
            });
        }
    }
}

fn paper_date(heading: &str) -> Option<NaiveDate> {
    let inner = heading.strip_suffix(')')?;
    let open = inner.rfind(" (")?;
    NaiveDate::parse_from_str(&inner[open + 2..], "%Y-%m-%d").ok()
}

/// Check a chain document: one root heading, strictly increasing year groups,
/// paper nodes dated within their group, each with exactly one non-empty
/// Motivation and Method bullet, and no duplicated paper nodes.
pub fn validate_chain_markdown(text: &str) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let schema = |node: &str, detail: String| Violation::SchemaViolation { node: node.to_string(), detail };

    if !text.ends_with('\n') || text.ends_with("\n\n") {
        v.push(schema("", "document must end with exactly one newline".into()));
    }

    let mut root_seen = false;
    let mut year: Option<i32> = None;
    let mut year_has_papers = true;
    let mut last_date: Option<NaiveDate> = None;
    let mut paper: Option<PaperNode> = None;
    let mut seen_nodes = BTreeSet::new();

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(label) = line.strip_prefix("# ") {
            if root_seen {
                v.push(schema(label, "second root heading".into()));
            } else if lineno != 0 {
                v.push(schema(label, "root heading must be the first line".into()));
            }
            root_seen = true;
        } else if let Some(y) = line.strip_prefix("## ") {
            finish(paper.take(), &mut v);
            if !year_has_papers {
                v.push(schema(&year.map(|y| y.to_string()).unwrap_or_default(), "year group without papers".into()));
            }
            if !root_seen {
                v.push(schema(y, "year group before root heading".into()));
            }
            match y.trim().parse::<i32>() {
                Ok(found) if y.trim().len() == 4 => {
                    if let Some(previous) = year {
                        if found <= previous {
                            v.push(Violation::YearOrder { previous, found });
                        }
                    }
                    year = Some(found);
                }
                _ => v.push(schema(y, "year heading is not a 4-digit year".into())),
            }
            year_has_papers = false;
        } else if let Some(heading) = line.strip_prefix("### ") {
            finish(paper.take(), &mut v);
            year_has_papers = true;
            if !seen_nodes.insert(heading.to_string()) {
                v.push(Violation::DuplicateNode { node: heading.to_string() });
            }
            match (paper_date(heading), year) {
                (None, _) => v.push(schema(heading, "paper heading lacks a (YYYY-MM-DD) date".into())),
                (_, None) => v.push(schema(heading, "paper node outside a year group".into())),
                (Some(d), Some(y)) => {
                    if d.year() != y {
                        v.push(schema(heading, format!("dated {d} but listed under {y}")));
                    }
                    if last_date.is_some_and(|prev| d < prev) {
                        v.push(schema(heading, "papers are not in date order".into()));
                    }
                    last_date = Some(d);
                }
            }
            paper = Some(PaperNode { heading: heading.to_string(), motivation: 0, method: 0 });
        } else if let Some(rest) = line.strip_prefix(MOTIVATION).or_else(|| line.strip_prefix(METHOD)) {
            let is_motivation = line.starts_with(MOTIVATION);
            match paper.as_mut() {
                Some(node) => {
                    if rest.trim().is_empty() {
                        v.push(schema(&node.heading, "empty bullet".into()));
                    }
                    if is_motivation {
                        node.motivation += 1;
                    } else {
                        node.method += 1;
                    }
                }
                None => v.push(schema("", format!("bullet outside a paper node at line {}", lineno + 1))),
            }
        } else {
            let node = paper.as_ref().map_or("", |p| p.heading.as_str());
            v.push(schema(node, format!("unexpected line {}: {line:?}", lineno + 1)));
        }
    }
    finish(paper.take(), &mut v);
    if !root_seen {
        v.push(schema("", "missing root heading".into()));
    }
    if !year_has_papers {
        v.push(schema(&year.map(|y| y.to_string()).unwrap_or_default(), "year group without papers".into()));
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmap::sort_chain;
    use crate::mmap::tests::pair;

    #[test]
    fn two_pair_chain_bytes() {
        let chain = sort_chain("c1", "Residual networks", vec![pair("b", "2017-02-01"), pair("a", "2016-06-27")]).unwrap();
        let md = emit_chain_markdown(&chain);
        assert_eq!(
            md,
            "# Residual networks\n\n## 2016\n\n### Paper a (2016-06-27)\n\n- Motivation: why a\n- Method: how a\n\n\
             ## 2017\n\n### Paper b (2017-02-01)\n\n- Motivation: why b\n- Method: how b\n"
        );
        assert_eq!(validate_chain_markdown(&md), Ok(()));
    }

    #[test]
    fn single_pair_validates() {
        let chain = sort_chain("c", "x", vec![pair("a", "2020-01-01")]).unwrap();
        assert_eq!(validate_chain_markdown(&emit_chain_markdown(&chain)), Ok(()));
    }

    #[test]
    fn control_characters_escaped() {
        let mut p = pair("a", "2020-01-01");
        p.motivation = "# heading\n- bullet".into();
        p.method = "-leading dash".into();
        p.title = "C# tricks".into();
        let chain = sort_chain("c", "# root", vec![p]).unwrap();
        let md = emit_chain_markdown(&chain);
        assert!(md.contains("- Motivation: \\# heading - bullet"));
        assert!(md.contains("- Method: \\-leading dash"));
        assert_eq!(validate_chain_markdown(&md), Ok(()));
    }

    #[test]
    fn missing_method_bullet() {
        let md = "# r\n\n## 2020\n\n### T (2020-01-01)\n\n- Motivation: m\n";
        let v = validate_chain_markdown(md).unwrap_err();
        assert!(matches!(&v[0], Violation::SchemaViolation { node, .. } if node == "T (2020-01-01)"));
    }

    #[test]
    fn duplicate_node() {
        let node = "### T (2020-01-01)\n\n- Motivation: m\n- Method: r\n";
        let md = format!("# r\n\n## 2020\n\n{node}\n{node}");
        let v = validate_chain_markdown(&md).unwrap_err();
        assert!(v.contains(&Violation::DuplicateNode { node: "T (2020-01-01)".into() }));
    }

    #[test]
    fn year_order_and_grouping() {
        let md = "# r\n\n## 2021\n\n### A (2021-01-01)\n\n- Motivation: m\n- Method: r\n\n## 2020\n\n### B (2021-05-01)\n\n- Motivation: m\n- Method: r\n";
        let v = validate_chain_markdown(md).unwrap_err();
        assert!(v.contains(&Violation::YearOrder { previous: 2021, found: 2020 }));
        assert!(v.iter().any(|x| matches!(x, Violation::SchemaViolation { detail, .. } if detail.contains("listed under"))));
    }

    #[test]
    fn trailing_newline_rule() {
        let chain = sort_chain("c", "x", vec![pair("a", "2020-01-01")]).unwrap();
        let md = emit_chain_markdown(&chain);
        assert!(validate_chain_markdown(&format!("{md}\n")).is_err());
        assert!(validate_chain_markdown(md.trim_end()).is_err());
    }
}
