//! The plain-text graph-map format.
//!
//! ```text
//! # a -> b, b -> b a
//! vertices: v
//! edges:
//!   a: v v
//!   b: v v
//! map:
//!   v -> v
//!   a -> b
//!   b -> b a
//! basepoint: v
//! ```
//!
//! Sections may come in any order and entries may share the header line.
//! Vertex images may be omitted when every vertex has an incident edge;
//! they are then read off the edge images. The basepoint defaults to the
//! first vertex.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgePoint, Graph, VertexId};
use crate::map::GraphMap;
use crate::rational::{self, Rat};

const SECTIONS: [&str; 4] = ["vertices", "edges", "map", "basepoint"];

/// A token together with its 1-based line and column.
#[derive(Debug, Clone)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokens(line_no: usize, line: &str, offset: usize) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Tok {
                    text: &line[s..i],
                    line: line_no,
                    col: offset + line[..s].chars().count() + 1,
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Body lines of each section, as token lists.
type Sections<'a> = HashMap<&'static str, (usize, Vec<Vec<Tok<'a>>>)>;

fn split_sections(text: &str) -> Result<Sections<'_>> {
    let mut sections: Sections<'_> = HashMap::new();
    let mut current: Option<&'static str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let trimmed = line.trim_start();
        let indent = line[..line.len() - trimmed.len()].chars().count();
        let header = SECTIONS.iter().find(|s| {
            trimmed
                .strip_prefix(**s)
                .is_some_and(|rest| rest.trim_start().starts_with(':'))
        });
        let (body, body_offset) = match header {
            Some(&name) => {
                if sections.contains_key(name) {
                    return Err(err(line_no, indent + 1, format!("duplicate section `{name}`")));
                }
                sections.insert(name, (line_no, Vec::new()));
                current = Some(name);
                let colon = trimmed.find(':').expect("header has a colon");
                let rest = &trimmed[colon + 1..];
                (rest, indent + trimmed[..colon + 1].chars().count())
            }
            None => (line, 0),
        };
        let toks = tokens(line_no, body, body_offset);
        if toks.is_empty() {
            continue;
        }
        let Some(name) = current else {
            return Err(err(line_no, toks[0].col, "expected a section header such as `vertices:`"));
        };
        sections.get_mut(name).expect("section exists").1.push(toks);
    }
    Ok(sections)
}

fn check_name(t: &Tok<'_>) -> Result<()> {
    let ok = !t.text.starts_with('-')
        && !t.text.contains([':', '(', ')', ','])
        && !SECTIONS.contains(&t.text)
        && t.text != "->";
    if ok {
        Ok(())
    } else {
        Err(err(t.line, t.col, format!("invalid name `{}`", t.text)))
    }
}

/// Parses a graph-map file and validates the result.
pub fn parse(text: &str) -> Result<GraphMap> {
    let map = parse_unchecked(text)?;
    map.ensure_valid()?;
    Ok(map)
}

/// Parses without running [`GraphMap::validate`].
pub fn parse_unchecked(text: &str) -> Result<GraphMap> {
    let sections = split_sections(text)?;
    let last_line = text.lines().count().max(1);
    let section = |name: &str| {
        sections
            .get(name)
            .ok_or_else(|| err(last_line, 1, format!("missing section `{name}:`")))
    };

    let (_, vertex_lines) = section("vertices")?;
    let vertex_toks: Vec<&Tok<'_>> = vertex_lines.iter().flatten().collect();
    let mut names: HashMap<&str, (usize, usize)> = HashMap::new();
    for t in &vertex_toks {
        check_name(t)?;
        if names.insert(t.text, (t.line, t.col)).is_some() {
            return Err(err(t.line, t.col, format!("duplicate name `{}`", t.text)));
        }
    }
    if vertex_toks.is_empty() {
        return Err(err(section("vertices")?.0, 1, "no vertices"));
    }

    let (_, edge_lines) = section("edges")?;
    let mut triples = Vec::new();
    for toks in edge_lines {
        let first = &toks[0];
        let Some(name) = first.text.strip_suffix(':') else {
            return Err(err(first.line, first.col, "expected `name: init term`"));
        };
        let name_tok = Tok {
            text: name,
            line: first.line,
            col: first.col,
        };
        check_name(&name_tok)?;
        if toks.len() != 3 {
            return Err(err(first.line, first.col, "expected `name: init term`"));
        }
        if names.insert(name, (first.line, first.col)).is_some() {
            return Err(err(first.line, first.col, format!("duplicate name `{name}`")));
        }
        for t in &toks[1..] {
            if !vertex_toks.iter().any(|v| v.text == t.text) {
                return Err(err(t.line, t.col, format!("unknown vertex `{}`", t.text)));
            }
        }
        triples.push((name, toks[1].text, toks[2].text));
    }
    let vnames: Vec<&str> = vertex_toks.iter().map(|t| t.text).collect();
    let g = Graph::new(&vnames, &triples)?;

    let (map_line, map_lines) = section("map")?;
    let mut vimg: Vec<Option<VertexId>> = vec![None; g.vertex_count()];
    let mut eimg: Vec<Option<Vec<DirEdge>>> = vec![None; g.edge_count()];
    for toks in map_lines {
        let src = &toks[0];
        if toks.get(1).map(|t| t.text) != Some("->") {
            let at = toks.get(1).unwrap_or(src);
            return Err(err(at.line, at.col, "expected `x -> image`"));
        }
        let rest = &toks[2..];
        if let Ok(v) = g.vertex_by_name(src.text) {
            if vimg[v.0].is_some() {
                return Err(err(src.line, src.col, format!("`{}` mapped twice", src.text)));
            }
            let [t] = rest else {
                return Err(err(src.line, src.col, "a vertex maps to exactly one vertex"));
            };
            let w = g
                .vertex_by_name(t.text)
                .map_err(|_| err(t.line, t.col, format!("unknown vertex `{}`", t.text)))?;
            vimg[v.0] = Some(w);
        } else if let Ok(e) = g.edge_by_name(src.text) {
            if eimg[e.0].is_some() {
                return Err(err(src.line, src.col, format!("`{}` mapped twice", src.text)));
            }
            let steps = rest
                .iter()
                .map(|t| {
                    g.parse_step(t.text)
                        .map_err(|_| err(t.line, t.col, format!("unknown edge `{}`", t.text)))
                })
                .collect::<Result<Vec<_>>>()?;
            eimg[e.0] = Some(steps);
        } else {
            return Err(err(
                src.line,
                src.col,
                format!("unknown vertex or edge `{}`", src.text),
            ));
        }
    }
    let edge_image: Vec<Vec<DirEdge>> = eimg
        .into_iter()
        .enumerate()
        .map(|(i, img)| {
            img.ok_or_else(|| {
                err(*map_line, 1, format!("no image for edge `{}`", g.edge_name(crate::EdgeId(i))))
            })
        })
        .collect::<Result<_>>()?;
    for e in g.edges() {
        let info = g.edge(e);
        let img = &edge_image[e.0];
        if let (Some(&first), Some(&last)) = (img.first(), img.last()) {
            vimg[info.init.0].get_or_insert(g.init(first));
            vimg[info.term.0].get_or_insert(g.term(last));
        }
    }
    let vertex_image: Vec<VertexId> = vimg
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                err(*map_line, 1, format!("no image for vertex `{}`", g.vertex_name(VertexId(i))))
            })
        })
        .collect::<Result<_>>()?;

    let basepoint = match sections.get("basepoint") {
        None => VertexId(0),
        Some((line, lines)) => {
            let toks: Vec<&Tok<'_>> = lines.iter().flatten().collect();
            let [t] = toks.as_slice() else {
                return Err(err(*line, 1, "expected one basepoint vertex"));
            };
            g.vertex_by_name(t.text)
                .map_err(|_| err(t.line, t.col, format!("unknown vertex `{}`", t.text)))?
        }
    };
    Ok(GraphMap::new(g, vertex_image, edge_image, basepoint))
}

/// Canonical text form; [`parse`] inverts it.
pub fn serialize(map: &GraphMap) -> String {
    let g = map.graph();
    let mut s = String::new();
    let vs: Vec<&str> = g.vertices().map(|v| g.vertex_name(v)).collect();
    s.push_str(&format!("vertices: {}\n", vs.join(" ")));
    s.push_str("edges:\n");
    for e in g.edges() {
        let info = g.edge(e);
        s.push_str(&format!(
            "  {}: {} {}\n",
            info.name,
            g.vertex_name(info.init),
            g.vertex_name(info.term)
        ));
    }
    s.push_str("map:\n");
    for v in g.vertices() {
        s.push_str(&format!("  {} -> {}\n", g.vertex_name(v), g.vertex_name(map.vertex_image(v))));
    }
    for e in g.edges() {
        let img: Vec<String> = map.edge_image(e).iter().map(|&d| g.step_name(d)).collect();
        let sep = if img.is_empty() { "" } else { " " };
        s.push_str(&format!("  {} ->{sep}{}\n", g.edge_name(e), img.join(" ")));
    }
    s.push_str(&format!("basepoint: {}\n", g.vertex_name(map.basepoint())));
    s
}

/// Parses `e:p/q` into a point strictly inside edge `e`.
pub fn parse_edge_point(g: &Graph, text: &str) -> Result<EdgePoint> {
    let (name, pos) = text
        .split_once(':')
        .ok_or_else(|| Error::Domain(format!("expected `edge:p/q`, got `{text}`")))?;
    let edge = g.edge_by_name(name.trim())?;
    let pos: Rat = rational::parse_rat(pos.trim())?;
    if pos <= rational::zero() || pos >= rational::one() {
        return Err(Error::Domain(format!("position in `{text}` must lie strictly between 0 and 1")));
    }
    Ok(EdgePoint { edge, pos })
}
