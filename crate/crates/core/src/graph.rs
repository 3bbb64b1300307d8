//! Finite graphs with combinatorial edge paths and points on edges.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeInfo {
    pub name: String,
    pub init: VertexId,
    pub term: VertexId,
}

/// A finite graph with named vertices and named, oriented edges. Loops and
/// multiple edges are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    vertices: Vec<String>,
    edges: Vec<EdgeInfo>,
}

impl Graph {
    /// Builds a graph from vertex names and `(edge, init, term)` triples.
    pub fn new<S: AsRef<str>>(vertices: &[S], edges: &[(S, S, S)]) -> Result<Self> {
        let mut g = Graph {
            vertices: Vec::new(),
            edges: Vec::new(),
        };
        let mut seen = HashMap::new();
        for v in vertices {
            let v = v.as_ref();
            if seen.insert(v.to_string(), ()).is_some() {
                return Err(Error::DuplicateName(v.to_string()));
            }
            g.vertices.push(v.to_string());
        }
        for (e, a, b) in edges {
            let e = e.as_ref();
            if seen.insert(e.to_string(), ()).is_some() {
                return Err(Error::DuplicateName(e.to_string()));
            }
            let init = g.vertex_by_name(a.as_ref())?;
            let term = g.vertex_by_name(b.as_ref())?;
            g.edges.push(EdgeInfo {
                name: e.to_string(),
                init,
                term,
            });
        }
        Ok(g)
    }

    /// A rose: one vertex `v` with a loop for each name.
    pub fn rose<S: AsRef<str>>(edges: &[S]) -> Self {
        let triples: Vec<(&str, &str, &str)> =
            edges.iter().map(|e| (e.as_ref(), "v", "v")).collect();
        Graph::new(&["v"], &triples).expect("rose edge names must be distinct and not `v`")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn edge(&self, e: EdgeId) -> &EdgeInfo {
        &self.edges[e.0]
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.0]
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edges[e.0].name
    }

    pub fn vertex_by_name(&self, name: &str) -> Result<VertexId> {
        self.vertices
            .iter()
            .position(|v| v == name)
            .map(VertexId)
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_by_name(&self, name: &str) -> Result<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.name == name)
            .map(EdgeId)
            .ok_or_else(|| Error::UnknownEdge(name.to_string()))
    }

    pub fn init(&self, d: DirEdge) -> VertexId {
        let info = &self.edges[d.edge.0];
        if d.forward {
            info.init
        } else {
            info.term
        }
    }

    pub fn term(&self, d: DirEdge) -> VertexId {
        self.init(d.reverse())
    }

    /// All `2·|edges|` directions, forward ones first.
    pub fn directions(&self) -> Vec<DirEdge> {
        let mut out: Vec<DirEdge> = self.edges().map(DirEdge::fwd).collect();
        out.extend(self.edges().map(DirEdge::rev));
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(e.init.0, e.term.0);
        }
        let root = uf.find(0);
        (0..self.vertices.len()).all(|v| uf.find(v) == root)
    }

    /// Euler characteristic `|V| - |E|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64
    }

    /// Rank of the fundamental group of a connected graph.
    pub fn rank(&self) -> usize {
        (1 - self.euler_characteristic()).max(0) as usize
    }

    /// Parses a step token: `x` for the forward edge, `-x` for its reverse.
    pub fn parse_step(&self, tok: &str) -> Result<DirEdge> {
        match tok.strip_prefix('-') {
            Some(name) => Ok(DirEdge::rev(self.edge_by_name(name)?)),
            None => Ok(DirEdge::fwd(self.edge_by_name(tok)?)),
        }
    }

    pub fn step_name(&self, d: DirEdge) -> String {
        if d.forward {
            self.edge_name(d.edge).to_string()
        } else {
            format!("-{}", self.edge_name(d.edge))
        }
    }

    /// Convenience for tests and examples: parses `"a -b c"`.
    pub fn steps(&self, text: &str) -> Result<Vec<DirEdge>> {
        text.split_whitespace().map(|t| self.parse_step(t)).collect()
    }

    /// Convenience: a path from whitespace separated step tokens.
    pub fn path(&self, text: &str) -> Result<EdgePath> {
        let steps = self.steps(text)?;
        match steps.first() {
            Some(&first) => EdgePath::new(self, self.init(first), steps),
            None => Err(Error::NotConcatenable { index: 0 }),
        }
    }

    pub fn point(&self, edge: &str, pos: Rat) -> Result<Point> {
        Ok(Point::on_edge(self, self.edge_by_name(edge)?, pos))
    }

    pub fn format_point(&self, p: &Point) -> String {
        match p {
            Point::Vertex(v) => self.vertex_name(*v).to_string(),
            Point::Edge(ep) => format!("{}({})", self.edge_name(ep.edge), rational::fmt_rat(&ep.pos)),
        }
    }
}

/// An edge together with a traversal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirEdge {
    pub edge: EdgeId,
    pub forward: bool,
}

impl DirEdge {
    pub fn fwd(edge: EdgeId) -> Self {
        DirEdge { edge, forward: true }
    }

    pub fn rev(edge: EdgeId) -> Self {
        DirEdge { edge, forward: false }
    }

    pub fn reverse(self) -> Self {
        DirEdge {
            edge: self.edge,
            forward: !self.forward,
        }
    }
}

/// A combinatorial edge path. The start vertex is always stored so that the
/// empty path at a vertex is representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgePath {
    start: VertexId,
    steps: Vec<DirEdge>,
}

impl EdgePath {
    pub fn new(g: &Graph, start: VertexId, steps: Vec<DirEdge>) -> Result<Self> {
        check_concatenable(g, start, &steps)?;
        Ok(EdgePath { start, steps })
    }

    pub fn empty(at: VertexId) -> Self {
        EdgePath {
            start: at,
            steps: Vec::new(),
        }
    }

    pub fn edge(g: &Graph, d: DirEdge) -> Self {
        EdgePath {
            start: g.init(d),
            steps: vec![d],
        }
    }

    pub(crate) fn from_parts_unchecked(start: VertexId, steps: Vec<DirEdge>) -> Self {
        EdgePath { start, steps }
    }

    pub fn start(&self) -> VertexId {
        self.start
    }

    pub fn end(&self, g: &Graph) -> VertexId {
        self.steps.last().map_or(self.start, |&d| g.term(d))
    }

    pub fn steps(&self) -> &[DirEdge] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<DirEdge> {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn reverse(&self, g: &Graph) -> EdgePath {
        EdgePath {
            start: self.end(g),
            steps: self.steps.iter().rev().map(|d| d.reverse()).collect(),
        }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, g: &Graph, other: &EdgePath) -> Result<EdgePath> {
        if self.end(g) != other.start {
            return Err(Error::NotConcatenable {
                index: self.steps.len(),
            });
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Ok(EdgePath {
            start: self.start,
            steps,
        })
    }

    /// Has no step immediately followed by its reversal.
    pub fn is_reduced(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] != w[0].reverse())
    }

    /// Freely reduces the path.
    pub fn tighten(&self) -> EdgePath {
        EdgePath {
            start: self.start,
            steps: reduce_steps(&self.steps),
        }
    }

    pub fn weighted_length(&self, w: &Weighting) -> Result<f64> {
        self.steps.iter().map(|d| w.get(d.edge)).sum()
    }

    pub fn display(&self, g: &Graph) -> String {
        if self.steps.is_empty() {
            return format!("[] at {}", g.vertex_name(self.start));
        }
        self.steps
            .iter()
            .map(|&d| g.step_name(d))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub(crate) fn check_concatenable(g: &Graph, start: VertexId, steps: &[DirEdge]) -> Result<()> {
    let mut at = start;
    for (i, &d) in steps.iter().enumerate() {
        if d.edge.0 >= g.edge_count() || g.init(d) != at {
            return Err(Error::NotConcatenable { index: i });
        }
        at = g.term(d);
    }
    Ok(())
}

/// Stack-based free reduction of a step sequence.
pub fn reduce_steps(steps: &[DirEdge]) -> Vec<DirEdge> {
    let mut out: Vec<DirEdge> = Vec::with_capacity(steps.len());
    for &d in steps {
        if out.last() == Some(&d.reverse()) {
            out.pop();
        } else {
            out.push(d);
        }
    }
    out
}

/// Freely reduces `path` after checking that it is concatenable.
pub fn tighten(g: &Graph, path: &EdgePath) -> Result<EdgePath> {
    check_concatenable(g, path.start, &path.steps)?;
    Ok(path.tighten())
}

/// A point strictly inside an edge, measured in `(0, 1)` along the edge's
/// preferred orientation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgePoint {
    pub edge: EdgeId,
    #[serde(with = "crate::rational")]
    pub pos: Rat,
}

impl EdgePoint {
    /// Position of the point read along the direction `forward`.
    pub fn pos_along(&self, forward: bool) -> Rat {
        if forward {
            self.pos.clone()
        } else {
            Rat::one() - &self.pos
        }
    }
}

/// A point of the graph: a vertex or an interior edge point. Positions 0 and
/// 1 always normalise to the corresponding vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Point {
    Vertex(VertexId),
    Edge(EdgePoint),
}

impl Point {
    /// # Panics
    /// If `pos` lies outside `[0, 1]`.
    pub fn on_edge(g: &Graph, edge: EdgeId, pos: Rat) -> Point {
        assert!(
            pos >= Rat::zero() && pos <= Rat::one(),
            "edge position out of range"
        );
        if pos.is_zero() {
            Point::Vertex(g.edge(edge).init)
        } else if pos.is_one() {
            Point::Vertex(g.edge(edge).term)
        } else {
            Point::Edge(EdgePoint { edge, pos })
        }
    }

    pub fn as_edge_point(&self) -> Option<&EdgePoint> {
        match self {
            Point::Edge(p) => Some(p),
            Point::Vertex(_) => None,
        }
    }

    pub fn is_vertex(&self) -> bool {
        matches!(self, Point::Vertex(_))
    }
}

/// Positive per-edge weights `|e|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighting(Vec<f64>);

impl Weighting {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Domain(format!("weight {i} is not strictly positive")));
        }
        Ok(Weighting(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Weighting(vec![1.0; n])
    }

    pub fn get(&self, e: EdgeId) -> Result<f64> {
        self.0.get(e.0).copied().ok_or(Error::MissingWeight(e.0))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Weighting {
        Weighting(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Weighted length of the sub-segment between two points of the same edge.
pub fn subpath_weight(p: &EdgePoint, q: &EdgePoint, w: &Weighting) -> Result<f64> {
    if p.edge != q.edge {
        return Err(Error::DifferentEdges);
    }
    let gap = rational::abs(&(&q.pos - &p.pos));
    Ok(rational::to_f64(&gap) * w.get(p.edge)?)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

impl fmt::Display for DirEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.forward {
            write!(f, "e{}", self.edge.0)
        } else {
            write!(f, "-e{}", self.edge.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn abc() -> Graph {
        Graph::rose(&["a", "b", "c"])
    }

    #[test]
    fn tighten_single_cancellation() {
        let g = abc();
        let p = g.path("a b -b c").unwrap();
        assert_eq!(tighten(&g, &p).unwrap(), g.path("a c").unwrap());
    }

    #[test]
    fn tighten_full_cancellation_keeps_basepoint() {
        let g = Graph::new(&["u", "w"], &[("a", "u", "w")]).unwrap();
        let p = g.path("a -a").unwrap();
        let t = tighten(&g, &p).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.start(), g.vertex_by_name("u").unwrap());
    }

    #[test]
    fn tighten_reduced_path_is_unchanged() {
        let g = abc();
        let p = g.path("a b c").unwrap();
        assert_eq!(tighten(&g, &p).unwrap(), p);
    }

    #[test]
    fn tighten_rejects_broken_paths() {
        let g = Graph::new(&["u", "w"], &[("a", "u", "w"), ("b", "u", "w")]).unwrap();
        let bad = EdgePath::from_parts_unchecked(VertexId(0), g.steps("a b").unwrap());
        assert_eq!(tighten(&g, &bad), Err(Error::NotConcatenable { index: 1 }));
    }

    #[test]
    fn weighted_lengths() {
        let g = abc();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let w = Weighting::new(vec![1.0, golden, 1.0]).unwrap();
        let l = g.path("a b").unwrap().weighted_length(&w).unwrap();
        assert!((l - 2.618_033_988_749_895).abs() < 1e-12);
        assert_eq!(EdgePath::empty(VertexId(0)).weighted_length(&w).unwrap(), 0.0);
        assert_eq!(g.path("a -a").unwrap().weighted_length(&w).unwrap(), 2.0);
        let short = Weighting::new(vec![1.0]).unwrap();
        assert_eq!(
            g.path("a b").unwrap().weighted_length(&short),
            Err(Error::MissingWeight(1))
        );
    }

    #[test]
    fn subpath_weights() {
        let a = EdgeId(0);
        let w2 = Weighting::new(vec![2.0]).unwrap();
        let p = EdgePoint { edge: a, pos: rat(1, 4) };
        let q = EdgePoint { edge: a, pos: rat(3, 4) };
        assert_eq!(subpath_weight(&p, &q, &w2).unwrap(), 1.0);
        assert_eq!(subpath_weight(&p, &p, &w2).unwrap(), 0.0);
        let w3 = Weighting::new(vec![3.0]).unwrap();
        let p = EdgePoint { edge: a, pos: rat(1, 3) };
        let q = EdgePoint { edge: a, pos: rat(2, 3) };
        assert!((subpath_weight(&p, &q, &w3).unwrap() - 1.0).abs() < 1e-15);
        let other = EdgePoint { edge: EdgeId(1), pos: rat(1, 2) };
        assert_eq!(subpath_weight(&p, &other, &w3), Err(Error::DifferentEdges));
    }

    #[test]
    fn endpoint_positions_normalise_to_vertices() {
        let g = Graph::new(&["u", "w"], &[("a", "u", "w")]).unwrap();
        assert_eq!(g.point("a", rat(0, 1)).unwrap(), Point::Vertex(VertexId(0)));
        assert_eq!(g.point("a", rat(1, 1)).unwrap(), Point::Vertex(VertexId(1)));
        assert!(!g.point("a", rat(1, 2)).unwrap().is_vertex());
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(Weighting::new(vec![1.0, 0.0]).is_err());
        assert!(Weighting::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn connectivity_and_rank() {
        let g = Graph::new(&["u", "w", "x"], &[("a", "u", "w"), ("b", "w", "u")]).unwrap();
        assert!(!g.is_connected());
        assert_eq!(abc().rank(), 3);
    }
}
