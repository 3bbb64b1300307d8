//! Graphviz DOT output. Node identifiers are assigned in storage order so
//! the text is deterministic.

use std::fmt::Write;

use crate::cubulation::CubeSkeleton;
use crate::dynamics::Level;
use crate::graph::{EdgeId, Graph};
use crate::rational::{fmt_rat, Interval};
use crate::walls::{WallApproximation, WallEdgeKind, WallGraph, WallNode};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn interval(g: &Graph, e: EdgeId, i: &Interval) -> String {
    format!("{}[{}, {}]", g.edge_name(e), fmt_rat(&i.lo), fmt_rat(&i.hi))
}

/// A level as a digraph with arcs from child to parent. The root sits on
/// top with one rank per depth.
pub fn level_dot(g: &Graph, level: &Level) -> String {
    let mut s = String::from("digraph level {\n  rankdir=BT;\n  node [shape=circle];\n");
    for (i, n) in level.nodes.iter().enumerate() {
        let shape = if n.parent.is_none() { " shape=doublecircle" } else { "" };
        let _ = writeln!(s, "  n{i} [label={}{shape}];", quote(&g.format_point(&n.point)));
    }
    for depth in 0..=level.length {
        let ids: Vec<String> = level
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.depth == depth)
            .map(|(i, _)| format!("n{i}"))
            .collect();
        if !ids.is_empty() {
            let _ = writeln!(s, "  {{ rank=same; {}; }}", ids.join("; "));
        }
    }
    for (i, n) in level.nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            let _ = writeln!(s, "  n{i} -> n{p};");
        }
    }
    s.push_str("}\n");
    s
}

fn wall_node_label(g: &Graph, wall: &WallGraph, node: &WallNode) -> (String, &'static str) {
    match node {
        WallNode::Vertex(v) => (g.vertex_name(*v).to_string(), "point"),
        WallNode::Boundary(p) => (g.format_point(&crate::Point::Edge(p.clone())), "box"),
        WallNode::Level { tunnel, index } => {
            let p = &wall.tunnels[*tunnel].level.nodes[*index].point;
            (format!("{}'", g.format_point(p)), "circle")
        }
        WallNode::Crossing(b) => (format!("x{b}"), "diamond"),
    }
}

/// A wall graph with one cluster per immersed wall. Slopes are dashed and
/// attachments dotted.
pub fn wall_dot(g: &Graph, wall: &WallGraph) -> String {
    let mut s = String::from("graph wall {\n  node [fontsize=10];\n");
    for c in 0..wall.component_count {
        let _ = writeln!(s, "  subgraph cluster_{c} {{\n    label=\"wall {c}\";");
        for (i, node) in wall.nodes.iter().enumerate() {
            if wall.component_of[i] == c {
                let (label, shape) = wall_node_label(g, wall, node);
                let _ = writeln!(s, "    n{i} [label={} shape={shape}];", quote(&label));
            }
        }
        s.push_str("  }\n");
    }
    for e in &wall.edges {
        let attrs = match e.kind {
            WallEdgeKind::Fragment(f) => {
                let fr = &wall.fragments[f];
                format!("label={} penwidth=2", quote(&interval(g, fr.edge, &fr.interval)))
            }
            WallEdgeKind::Level(t) => format!("color=blue tooltip=\"tunnel {t}\""),
            WallEdgeKind::Slope(t) => format!("style=dashed label=\"s{t}\""),
            WallEdgeKind::Attachment(t) => format!("style=dotted tooltip=\"tunnel {t}\""),
        };
        let _ = writeln!(s, "  n{} -- n{} [{attrs}];", e.a, e.b);
    }
    s.push_str("}\n");
    s
}

/// The approximation: each nucleus image as a box listing its intervals,
/// each slope image as a dashed chain along the forward orbit.
pub fn approximation_dot(g: &Graph, approx: &WallApproximation) -> String {
    let mut s = String::from("digraph approximation {\n  node [fontsize=10];\n");
    for (i, n) in approx.nuclei.iter().enumerate() {
        let parts: Vec<String> = n.intervals.iter().map(|(e, iv)| interval(g, *e, iv)).collect();
        let label = format!("nucleus {}\\n{}", n.component, parts.join("\\n"));
        let _ = writeln!(s, "  k{i} [shape=box label=\"{}\"];", label.replace('"', "\\\""));
    }
    for (i, sl) in approx.slopes.iter().enumerate() {
        let _ = writeln!(
            s,
            "  s{i}_b [shape=box style=rounded label={}];",
            quote(&format!("bust {} {:?}", sl.bust, sl.sign))
        );
        for (j, p) in sl.orbit.iter().enumerate() {
            let _ = writeln!(s, "  s{i}_{j} [label={}];", quote(&g.format_point(p)));
        }
        let _ = writeln!(s, "  s{i}_b -> s{i}_0 [style=dashed];");
        for j in 1..sl.orbit.len() {
            let _ = writeln!(s, "  s{i}_{} -> s{i}_{j} [style=dashed];", j - 1);
        }
    }
    s.push_str("}\n");
    s
}

/// The 1-skeleton of a dual cube complex; principal vertices carry their
/// chamber names and every edge is labelled by its wall.
pub fn skeleton_dot(sk: &CubeSkeleton, chambers: &[String]) -> String {
    let mut s = String::from("graph skeleton {\n  node [shape=circle fontsize=10];\n");
    for (i, u) in sk.vertices.iter().enumerate() {
        let bits: String = u.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let names: Vec<&str> = sk
            .principal
            .iter()
            .zip(chambers)
            .filter(|(&v, _)| v == i)
            .map(|(_, c)| c.as_str())
            .collect();
        let label = if names.is_empty() {
            bits
        } else {
            format!("{} {bits}", names.join(","))
        };
        let _ = writeln!(s, "  v{i} [label={}];", quote(&label));
    }
    for (u, v, w) in &sk.edges {
        let _ = writeln!(s, "  v{u} -- v{v} [label=\"w{w}\"];");
    }
    s.push_str("}\n");
    s
}
