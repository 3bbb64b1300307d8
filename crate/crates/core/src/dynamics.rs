//! Exact point dynamics.
//!
//! Every edge `e` is parametrised by `[0, 1]` and `φ` maps the `k`-th of
//! `|φ(e)|` equal subintervals linearly onto the `k`-th step of `φ(e)`. All
//! slopes and offsets are therefore integers and orbits stay rational.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgeId, EdgePoint, Point};
use crate::map::GraphMap;
use crate::rational::{int, Interval, Rat};

/// One linear piece: `domain` maps onto the whole of `target`, with the
/// target position (in the target's preferred orientation) given by
/// `offset + slope · t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub domain: Interval,
    pub target: DirEdge,
    #[serde(with = "crate::rational")]
    pub offset: Rat,
    #[serde(with = "crate::rational")]
    pub slope: Rat,
}

impl Piece {
    pub fn apply(&self, t: &Rat) -> Rat {
        &self.offset + &self.slope * t
    }

    pub fn invert(&self, y: &Rat) -> Rat {
        (y - &self.offset) / &self.slope
    }
}

/// The restriction of `φ^L` to one edge as an ordered list of pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PLRestriction {
    pub edge: EdgeId,
    pub power: usize,
    pub pieces: Vec<Piece>,
}

impl PLRestriction {
    /// Index of a piece whose closed domain contains `t` (the left one at a
    /// breakpoint).
    pub fn piece_index(&self, t: &Rat) -> Option<usize> {
        let i = self.pieces.partition_point(|p| &p.domain.hi < t);
        (i < self.pieces.len() && self.pieces[i].domain.contains(t)).then_some(i)
    }

    /// `φ^L` at position `t` of the edge.
    pub fn eval(&self, map: &GraphMap, t: &Rat) -> Option<Point> {
        let p = &self.pieces[self.piece_index(t)?];
        Some(Point::on_edge(map.graph(), p.target.edge, p.apply(t)))
    }

    /// Interior breakpoints, i.e. the points sent to vertices.
    pub fn breakpoints(&self) -> impl Iterator<Item = &Rat> {
        self.pieces.iter().skip(1).map(|p| &p.domain.lo)
    }

    pub fn targets(&self) -> Vec<DirEdge> {
        self.pieces.iter().map(|p| p.target).collect()
    }
}

/// The chart of `φ` on `e`.
pub fn chart(map: &GraphMap, e: EdgeId) -> PLRestriction {
    let img = map.edge_image(e);
    let m = img.len() as i64;
    let pieces = img
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let k = k as i64;
            let (offset, slope) = if d.forward {
                (int(-k), int(m))
            } else {
                (int(1 + k), int(-m))
            };
            Piece {
                domain: Interval::new(Rat::new(k.into(), m.into()), Rat::new((k + 1).into(), m.into())),
                target: d,
                offset,
                slope,
            }
        })
        .collect();
    PLRestriction {
        edge: e,
        power: 1,
        pieces,
    }
}

/// The restriction of `φ^L` to `e`. Piece targets read in order spell the
/// untightened path `φ^L(e)`.
pub fn pl_restriction(map: &GraphMap, e: EdgeId, power: usize) -> PLRestriction {
    let charts: Vec<PLRestriction> = map.graph().edges().map(|f| chart(map, f)).collect();
    let mut pieces = vec![Piece {
        domain: Interval::new(Rat::zero(), Rat::one()),
        target: DirEdge::fwd(e),
        offset: Rat::zero(),
        slope: Rat::one(),
    }];
    for _ in 0..power {
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for p in &pieces {
            let c = &charts[p.target.edge.0];
            let mut sub: Vec<Piece> = c
                .pieces
                .iter()
                .map(|q| {
                    let a = p.invert(&q.domain.lo);
                    let b = p.invert(&q.domain.hi);
                    Piece {
                        domain: Interval::new(a, b),
                        target: q.target,
                        offset: &q.offset + &q.slope * &p.offset,
                        slope: &q.slope * &p.slope,
                    }
                })
                .collect();
            if p.slope.is_negative() {
                sub.reverse();
            }
            next.extend(sub);
        }
        pieces = next;
    }
    // reversed traversals of a target edge still read the path forwards
    for p in &mut pieces {
        p.target.forward = p.slope.is_positive();
    }
    PLRestriction {
        edge: e,
        power,
        pieces,
    }
}

/// `φ(p)`, exactly.
pub fn image_point(map: &GraphMap, p: &Point) -> Point {
    match p {
        Point::Vertex(v) => Point::Vertex(map.vertex_image(*v)),
        Point::Edge(ep) => {
            let img = map.edge_image(ep.edge);
            let m = int(img.len() as i64);
            let scaled = &ep.pos * &m;
            if scaled.is_integer() {
                let k: usize = scaled.to_integer().try_into().expect("small index");
                return Point::Vertex(map.graph().init(img[k]));
            }
            let k = scaled.floor();
            let local = &scaled - &k;
            let k: usize = k.to_integer().try_into().expect("small index");
            let d = img[k];
            let pos = if d.forward { local } else { Rat::one() - local };
            Point::Edge(EdgePoint { edge: d.edge, pos })
        }
    }
}

pub fn iterate_point(map: &GraphMap, p: &Point, n: usize) -> Point {
    (0..n).fold(p.clone(), |q, _| image_point(map, &q))
}

/// All `y` with `φ^L(y) = p`, sorted and deduplicated.
pub fn preimages(map: &GraphMap, p: &Point, power: usize) -> Vec<Point> {
    let mut out = BTreeSet::new();
    match p {
        Point::Edge(ep) => {
            for f in map.graph().edges() {
                let r = pl_restriction(map, f, power);
                for piece in r.pieces.iter().filter(|q| q.target.edge == ep.edge) {
                    let t = piece.invert(&ep.pos);
                    out.insert(Point::on_edge(map.graph(), f, t));
                }
            }
        }
        Point::Vertex(w) => {
            for v in map.graph().vertices() {
                if map.iterate_vertex(v, power) == *w {
                    out.insert(Point::Vertex(v));
                }
            }
            for f in map.graph().edges() {
                let r = pl_restriction(map, f, power);
                for t in r.breakpoints() {
                    if r.eval(map, t) == Some(Point::Vertex(*w)) {
                        out.insert(Point::on_edge(map.graph(), f, t.clone()));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: EdgePoint,
    /// Index of the piece of the restriction that contains the point.
    pub piece: usize,
}

/// Fixed points of `φ^L` on one edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicPoints {
    pub edge: EdgeId,
    pub power: usize,
    pub interior: Vec<FixedPoint>,
    /// Endpoint positions (0 or 1) fixed by an edge-to-edge piece.
    #[serde(with = "rat_vec")]
    pub endpoint_fixed: Vec<Rat>,
}

mod rat_vec {
    use super::Rat;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(crate::rational::fmt_rat)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let v: Vec<String> = serde::Deserialize::deserialize(d)?;
        v.iter()
            .map(|s| crate::rational::parse_rat(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Solves `s = a + m·s` on every piece of `φ^L|e` that maps back onto `e`.
/// Each such piece has `|m| > 1` on an expanding edge, so it holds exactly
/// one fixed point.
pub fn periodic_points(map: &GraphMap, e: EdgeId, power: usize) -> Result<PeriodicPoints> {
    if power == 0 {
        return Err(Error::Domain("power must be at least 1".into()));
    }
    map.ensure_valid()?;
    if !map.expanding_edges()?[e.0] {
        return Err(Error::NotExpanding(map.graph().edge_name(e).to_string()));
    }
    let r = pl_restriction(map, e, power);
    let mut out = PeriodicPoints {
        edge: e,
        power,
        interior: Vec::new(),
        endpoint_fixed: Vec::new(),
    };
    for (i, piece) in r.pieces.iter().enumerate() {
        if piece.target.edge != e {
            continue;
        }
        if piece.slope.abs().is_one() {
            return Err(Error::NotExpanding(map.graph().edge_name(e).to_string()));
        }
        let s = &piece.offset / (Rat::one() - &piece.slope);
        debug_assert!(piece.domain.contains(&s));
        if s.is_zero() || s.is_one() {
            if !out.endpoint_fixed.contains(&s) {
                out.endpoint_fixed.push(s);
            }
        } else {
            out.interior.push(FixedPoint {
                point: EdgePoint { edge: e, pos: s },
                piece: i,
            });
        }
    }
    Ok(out)
}

/// Least `k ≥ 1` with `φ^k(p) = p`, searching up to `max`.
pub fn minimal_period(map: &GraphMap, p: &Point, max: usize) -> Option<usize> {
    let mut q = p.clone();
    for k in 1..=max {
        q = image_point(map, &q);
        if &q == p {
            return Some(k);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularVerdict {
    pub singular_within_bound: bool,
    pub hit: Option<usize>,
    pub bound: usize,
}

/// Looks for `k ≤ k_max` with `φ^k(p)` a vertex.
pub fn is_singular(map: &GraphMap, p: &Point, k_max: usize) -> SingularVerdict {
    let mut q = p.clone();
    for k in 0..=k_max {
        if q.is_vertex() {
            return SingularVerdict {
                singular_within_bound: true,
                hit: Some(k),
                bound: k_max,
            };
        }
        if k < k_max {
            q = image_point(map, &q);
        }
    }
    SingularVerdict {
        singular_within_bound: false,
        hit: None,
        bound: k_max,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelNode {
    pub point: Point,
    pub depth: usize,
    /// Index of the node this one maps to under `φ`.
    pub parent: Option<usize>,
}

/// All preimage points of the root up to depth `length`, as a rooted tree
/// directed towards the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub root: Point,
    pub length: usize,
    pub nodes: Vec<LevelNode>,
}

impl Level {
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.parent == Some(i))
            .map(|(j, _)| j)
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                has_child[p] = true;
            }
        }
        (0..self.nodes.len()).filter(|&i| !has_child[i]).collect()
    }

    pub fn at_depth(&self, depth: usize) -> impl Iterator<Item = &LevelNode> {
        self.nodes.iter().filter(move |n| n.depth == depth)
    }

    /// The level of a shorter length with the same root.
    pub fn truncate(&self, length: usize) -> Level {
        Level {
            root: self.root.clone(),
            length: length.min(self.length),
            nodes: self
                .nodes
                .iter()
                .filter(|n| n.depth <= length)
                .cloned()
                .collect(),
        }
    }

    /// Drops branches that die out before the full length, keeping only the
    /// forward paths that start at depth `length`.
    pub fn pruned(&self) -> Level {
        let mut keep: Vec<bool> = self.nodes.iter().map(|n| n.depth == self.length).collect();
        for i in (0..self.nodes.len()).rev() {
            if keep[i] {
                if let Some(p) = self.nodes[i].parent {
                    keep[p] = true;
                }
            }
        }
        keep[0] = true;
        let mut index = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate().filter(|(i, _)| keep[*i]) {
            index[i] = nodes.len();
            nodes.push(LevelNode {
                point: n.point.clone(),
                depth: n.depth,
                parent: n.parent.map(|p| index[p]),
            });
        }
        Level {
            root: self.root.clone(),
            length: self.length,
            nodes,
        }
    }

    /// Checks the tree structure: node 0 is the root, every other node has
    /// exactly one parent one level up, and that parent is its image.
    pub fn check_tree(&self, map: &GraphMap) -> std::result::Result<(), String> {
        let Some(first) = self.nodes.first() else {
            return Err("no root".into());
        };
        if first.parent.is_some() || first.depth != 0 || first.point != self.root {
            return Err("node 0 is not the root".into());
        }
        let mut seen = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !seen.insert((n.depth, n.point.clone())) {
                return Err(format!("node {i} duplicates a (point, depth) pair"));
            }
            if i == 0 {
                continue;
            }
            let Some(p) = n.parent else {
                return Err(format!("node {i} has no parent"));
            };
            if p >= i || self.nodes[p].depth + 1 != n.depth {
                return Err(format!("node {i} has a parent at the wrong depth"));
            }
            if image_point(map, &n.point) != self.nodes[p].point {
                return Err(format!("node {i} does not map to its parent"));
            }
        }
        Ok(())
    }
}

/// Breadth-first preimage expansion of `root` to depth `length`.
pub fn level(map: &GraphMap, root: &Point, length: usize) -> Level {
    let mut nodes = vec![LevelNode {
        point: root.clone(),
        depth: 0,
        parent: None,
    }];
    let mut frontier = vec![0usize];
    for depth in 1..=length {
        let mut next = Vec::new();
        for &i in &frontier {
            for y in preimages(map, &nodes[i].point, 1) {
                nodes.push(LevelNode {
                    point: y,
                    depth,
                    parent: Some(i),
                });
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    Level {
        root: root.clone(),
        length,
        nodes,
    }
}

/// Searches `L = 1, 2, …, cap` for a fixed point of `φ^L` on the edge of
/// `p` within `eps` of `p`; returns the nearest one and its exact period.
pub fn find_periodic_near(
    map: &GraphMap,
    p: &EdgePoint,
    eps: &Rat,
    cap: usize,
) -> Result<(EdgePoint, usize)> {
    if !map.is_irreducible()? {
        return Err(Error::NotIrreducible);
    }
    for power in 1..=cap {
        let pts = periodic_points(map, p.edge, power)?;
        let best = pts
            .interior
            .into_iter()
            .map(|f| {
                let d = (&f.point.pos - &p.pos).abs();
                (d, f.point)
            })
            .filter(|(d, _)| d <= eps)
            .min();
        if let Some((_, q)) = best {
            let period = minimal_period(map, &Point::Edge(q.clone()), power)
                .expect("fixed point of φ^L has period dividing L");
            return Ok((q, period));
        }
    }
    Err(Error::PeriodCapExceeded { reached: cap })
}
