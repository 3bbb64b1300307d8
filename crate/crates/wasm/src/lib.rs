//! Browser bindings. Every export takes the graph-map text and returns JSON
//! for the page to draw; errors come back as plain messages.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fbcube_core::dynamics::{level, periodic_points, pl_restriction};
use fbcube_core::leafspace::{leaf_distance, AnchoredPath, MetricMap, MetricPoint};
use fbcube_core::perron::{perron_eigen, TransitionMatrix, DEFAULT_TOL};
use fbcube_core::rational::{fmt_rat, to_f64};
use fbcube_core::{format, GraphMap, Point};

/// Piece counts grow geometrically; this keeps the page responsive.
pub const MAX_POWER: usize = 12;
pub const MAX_DEPTH: usize = 40;
pub const MAX_LEVEL_DEPTH: usize = 8;

type Out = Result<String, String>;

fn load(text: &str) -> Result<GraphMap, String> {
    format::parse(text).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[derive(Serialize)]
struct PieceOut {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    target: String,
    label: String,
}

#[derive(Serialize)]
struct PlOut {
    edge: String,
    power: usize,
    edges: Vec<String>,
    pieces: Vec<PieceOut>,
    fixed: Vec<String>,
    fixed_positions: Vec<f64>,
}

/// The graph of `φ^power` restricted to `edge`: one segment per chart
/// piece, with its position in the target edge, plus the interior fixed
/// points.
#[wasm_bindgen]
pub fn pl_graph(map_text: &str, edge: &str, power: usize) -> Out {
    if power > MAX_POWER {
        return Err(format!("power is capped at {MAX_POWER} in the demo"));
    }
    let map = load(map_text)?;
    let g = map.graph();
    let e = g.edge_by_name(edge).map_err(|e| e.to_string())?;
    let pl = pl_restriction(&map, e, power);
    let pieces = pl
        .pieces
        .iter()
        .map(|p| PieceOut {
            x0: to_f64(&p.domain.lo),
            x1: to_f64(&p.domain.hi),
            y0: to_f64(&p.apply(&p.domain.lo)),
            y1: to_f64(&p.apply(&p.domain.hi)),
            target: g.edge_name(p.target.edge).to_string(),
            label: format!("[{}, {}] -> {}", fmt_rat(&p.domain.lo), fmt_rat(&p.domain.hi), g.step_name(p.target)),
        })
        .collect();
    let (fixed, fixed_positions) = if power == 0 {
        (Vec::new(), Vec::new())
    } else {
        match periodic_points(&map, e, power) {
            Ok(pp) => pp
                .interior
                .iter()
                .map(|f| (g.format_point(&Point::Edge(f.point.clone())), to_f64(&f.point.pos)))
                .unzip(),
            Err(_) => (Vec::new(), Vec::new()),
        }
    };
    Ok(to_json(&PlOut {
        edge: edge.to_string(),
        power,
        edges: g.edges().map(|e| g.edge_name(e).to_string()).collect(),
        pieces,
        fixed,
        fixed_positions,
    }))
}

#[derive(Serialize)]
struct DmetricOut {
    values: Vec<f64>,
    estimate: f64,
    stabilized: bool,
    eigenvalue: f64,
}

/// `d_0 … d_depth` between two points given as `edge:p/q` in the
/// Perron-Frobenius metric chart.
#[wasm_bindgen]
pub fn dmetric(map_text: &str, from: &str, to: &str, depth: usize) -> Out {
    if depth > MAX_DEPTH {
        return Err(format!("depth is capped at {MAX_DEPTH} in the demo"));
    }
    let map = load(map_text)?;
    let g = map.graph();
    let x = format::parse_edge_point(g, from).map_err(|e| e.to_string())?;
    let y = format::parse_edge_point(g, to).map_err(|e| e.to_string())?;
    let pd = perron_eigen(&TransitionMatrix::of(&map), DEFAULT_TOL).map_err(|e| e.to_string())?;
    let mm = MetricMap::new(&map, &pd).map_err(|e| e.to_string())?;
    let path = AnchoredPath::canonical(
        g,
        MetricPoint::Edge {
            edge: x.edge,
            pos: to_f64(&x.pos),
        },
        MetricPoint::Edge {
            edge: y.edge,
            pos: to_f64(&y.pos),
        },
    );
    let est = leaf_distance(&mm, &path, depth, 1e-9, 3).map_err(|e| e.to_string())?;
    Ok(to_json(&DmetricOut {
        values: est.values,
        estimate: est.estimate,
        stabilized: est.stabilized,
        eigenvalue: pd.eigenvalue,
    }))
}

#[derive(Serialize)]
struct NodeOut {
    label: String,
    depth: usize,
    parent: Option<usize>,
}

/// The level of `point` to the given depth, nodes in breadth-first order.
#[wasm_bindgen]
pub fn level_tree(map_text: &str, point: &str, depth: usize) -> Out {
    if depth > MAX_LEVEL_DEPTH {
        return Err(format!("depth is capped at {MAX_LEVEL_DEPTH} in the demo"));
    }
    let map = load(map_text)?;
    let g = map.graph();
    let p = format::parse_edge_point(g, point).map_err(|e| e.to_string())?;
    let lv = level(&map, &Point::Edge(p), depth);
    let nodes: Vec<NodeOut> = lv
        .nodes
        .iter()
        .map(|n| NodeOut {
            label: g.format_point(&n.point),
            depth: n.depth,
            parent: n.parent,
        })
        .collect();
    Ok(to_json(&nodes))
}
