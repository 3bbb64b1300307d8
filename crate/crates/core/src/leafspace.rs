//! Scaled path metrics `dₙ` and their limit, the leaf-space distance.
//!
//! Lengths only behave well when `φ` stretches every edge uniformly, so this
//! module works in the Perron–Frobenius chart: the `k`-th step `s_k` of
//! `φ(e)` is the image of a subinterval of `e` of relative length
//! `|s_k| / (M w)_e`. A train track map is then a local homothety with
//! factor `ϖ`. Positions are fractions of edge length in this chart and are
//! floats; rational inputs are converted.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgeId, Graph, Point, VertexId};
use crate::map::GraphMap;
use crate::perron::PerronData;
use crate::rational;

/// Positions closer than this are the same point.
pub const JUNCTION_TOL: f64 = 1e-9;
/// Segments shorter than this (in edge fractions) are dropped.
pub const SEGMENT_TOL: f64 = 1e-12;
/// Slack allowed when checking that `dₙ` does not increase.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricPoint {
    Vertex(VertexId),
    Edge { edge: EdgeId, pos: f64 },
}

impl MetricPoint {
    pub fn from_point(p: &Point) -> Self {
        match p {
            Point::Vertex(v) => MetricPoint::Vertex(*v),
            Point::Edge(ep) => MetricPoint::Edge {
                edge: ep.edge,
                pos: rational::to_f64(&ep.pos),
            },
        }
    }

    /// Snaps positions near 0 or 1 to the vertex.
    pub fn normalize(self, g: &Graph) -> Self {
        match self {
            MetricPoint::Edge { edge, pos } if pos <= JUNCTION_TOL => {
                MetricPoint::Vertex(g.edge(edge).init)
            }
            MetricPoint::Edge { edge, pos } if pos >= 1.0 - JUNCTION_TOL => {
                MetricPoint::Vertex(g.edge(edge).term)
            }
            p => p,
        }
    }

    pub fn approx_eq(&self, other: &MetricPoint, g: &Graph) -> bool {
        match (self.normalize(g), other.normalize(g)) {
            (MetricPoint::Vertex(a), MetricPoint::Vertex(b)) => a == b,
            (MetricPoint::Edge { edge: e, pos: s }, MetricPoint::Edge { edge: f, pos: t }) => {
                e == f && (s - t).abs() <= JUNCTION_TOL
            }
            _ => false,
        }
    }
}

/// A straight run along one edge from `from` to `to` (either order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub edge: EdgeId,
    pub from: f64,
    pub to: f64,
}

impl Segment {
    fn span(&self) -> f64 {
        (self.to - self.from).abs()
    }

    fn reversed(self) -> Segment {
        Segment {
            edge: self.edge,
            from: self.to,
            to: self.from,
        }
    }

    fn start(&self, g: &Graph) -> MetricPoint {
        MetricPoint::Edge {
            edge: self.edge,
            pos: self.from,
        }
        .normalize(g)
    }

    fn end(&self, g: &Graph) -> MetricPoint {
        MetricPoint::Edge {
            edge: self.edge,
            pos: self.to,
        }
        .normalize(g)
    }
}

/// A path between two points of the graph with partial end edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredPath {
    pub segments: Vec<Segment>,
}

impl AnchoredPath {
    /// Checks that consecutive segments meet.
    pub fn new(g: &Graph, segments: Vec<Segment>) -> Result<Self> {
        for (i, w) in segments.windows(2).enumerate() {
            if !w[0].end(g).approx_eq(&w[1].start(g), g) {
                return Err(Error::NotConcatenable { index: i + 1 });
            }
        }
        Ok(AnchoredPath { segments })
    }

    pub fn within_edge(edge: EdgeId, from: f64, to: f64) -> Self {
        AnchoredPath {
            segments: vec![Segment { edge, from, to }],
        }
    }

    /// The path from `x` back to the initial vertex of its edge, through a
    /// fixed spanning tree, and out along the edge of `y`. Two points of
    /// the same edge are joined directly.
    pub fn canonical(g: &Graph, x: MetricPoint, y: MetricPoint) -> Self {
        let x = x.normalize(g);
        let y = y.normalize(g);
        if let (MetricPoint::Edge { edge: e, pos: s }, MetricPoint::Edge { edge: f, pos: t }) = (x, y)
        {
            if e == f {
                return AnchoredPath::within_edge(e, s, t);
            }
        }
        let mut segs = Vec::new();
        let u = match x {
            MetricPoint::Vertex(v) => v,
            MetricPoint::Edge { edge, pos } => {
                segs.push(Segment { edge, from: pos, to: 0.0 });
                g.edge(edge).init
            }
        };
        let (v, tail) = match y {
            MetricPoint::Vertex(v) => (v, None),
            MetricPoint::Edge { edge, pos } => (
                g.edge(edge).init,
                Some(Segment { edge, from: 0.0, to: pos }),
            ),
        };
        segs.extend(tree_path(g, u, v));
        segs.extend(tail);
        AnchoredPath {
            segments: tighten_segments(&segs),
        }
    }

    pub fn length(&self, w: &[f64]) -> f64 {
        self.segments.iter().map(|s| s.span() * w[s.edge.0]).sum()
    }

    pub fn tighten(&self) -> AnchoredPath {
        AnchoredPath {
            segments: tighten_segments(&self.segments),
        }
    }
}

/// Spanning tree path as full-edge segments.
fn tree_path(g: &Graph, u: VertexId, v: VertexId) -> Vec<Segment> {
    let root = VertexId(0);
    let mut parent: Vec<Option<Segment>> = vec![None; g.vertex_count()];
    let mut seen = vec![false; g.vertex_count()];
    seen[root.0] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(a) = queue.pop_front() {
        for e in g.edges() {
            let info = g.edge(e);
            for (from, to, seg) in [
                (info.init, info.term, Segment { edge: e, from: 1.0, to: 0.0 }),
                (info.term, info.init, Segment { edge: e, from: 0.0, to: 1.0 }),
            ] {
                if from == a && !seen[to.0] {
                    seen[to.0] = true;
                    // segment runs from the child up to its parent
                    parent[to.0] = Some(seg);
                    queue.push_back(to);
                }
            }
        }
    }
    let up = |mut x: VertexId| {
        let mut out = Vec::new();
        while let Some(s) = parent[x.0] {
            out.push(s);
            x = s.end(g).vertex().expect("tree segments end at vertices");
        }
        out
    };
    let mut path = up(u);
    path.extend(up(v).into_iter().rev().map(Segment::reversed));
    path
}

impl MetricPoint {
    fn vertex(self) -> Option<VertexId> {
        match self {
            MetricPoint::Vertex(v) => Some(v),
            MetricPoint::Edge { .. } => None,
        }
    }
}

/// Free reduction of a segment path: consecutive runs on the same edge that
/// meet at the same position are joined, which cancels backtracking.
pub fn tighten_segments(segs: &[Segment]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    for &s in segs {
        if s.span() < SEGMENT_TOL {
            continue;
        }
        match out.last_mut() {
            Some(top) if top.edge == s.edge && (top.to - s.from).abs() <= JUNCTION_TOL => {
                top.to = s.to;
                if top.span() < SEGMENT_TOL {
                    out.pop();
                }
            }
            _ => out.push(s),
        }
    }
    out
}

/// The uniformly stretching chart of `φ` on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChart {
    /// `breaks[k]..breaks[k+1]` maps onto step `k` of the image.
    pub breaks: Vec<f64>,
    pub targets: Vec<DirEdge>,
}

impl MetricChart {
    pub fn new(map: &GraphMap, w: &[f64], e: EdgeId) -> Self {
        let targets = map.edge_image(e).to_vec();
        let total: f64 = targets.iter().map(|d| w[d.edge.0]).sum();
        let mut breaks = Vec::with_capacity(targets.len() + 1);
        let mut acc = 0.0;
        breaks.push(0.0);
        for d in &targets[..targets.len() - 1] {
            acc += w[d.edge.0];
            breaks.push(acc / total);
        }
        breaks.push(1.0);
        MetricChart { breaks, targets }
    }

    fn local(&self, k: usize, t: f64) -> f64 {
        let (a, b) = (self.breaks[k], self.breaks[k + 1]);
        let u = ((t - a) / (b - a)).clamp(0.0, 1.0);
        if self.targets[k].forward {
            u
        } else {
            1.0 - u
        }
    }

    /// Image of the run `lo..hi` with `lo < hi`, in order.
    fn image_increasing(&self, edge_lo: f64, edge_hi: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        for k in 0..self.targets.len() {
            let a = edge_lo.max(self.breaks[k]);
            let b = edge_hi.min(self.breaks[k + 1]);
            if b - a > 0.0 {
                out.push(Segment {
                    edge: self.targets[k].edge,
                    from: self.local(k, a),
                    to: self.local(k, b),
                });
            }
        }
        out
    }

    fn image_point(&self, map: &GraphMap, t: f64) -> MetricPoint {
        let g = map.graph();
        let k = self
            .breaks
            .windows(2)
            .position(|w| t <= w[1])
            .unwrap_or(self.targets.len() - 1);
        MetricPoint::Edge {
            edge: self.targets[k].edge,
            pos: self.local(k, t),
        }
        .normalize(g)
    }
}

/// The uniformly stretching representative of `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMap {
    pub charts: Vec<MetricChart>,
    pub weights: Vec<f64>,
    pub eigenvalue: f64,
}

impl MetricMap {
    pub fn new(map: &GraphMap, pd: &PerronData) -> Result<Self> {
        let w = pd.weights.as_slice().to_vec();
        if w.len() != map.edge_count() {
            return Err(Error::MissingWeight(w.len()));
        }
        Ok(MetricMap {
            charts: map.graph().edges().map(|e| MetricChart::new(map, &w, e)).collect(),
            weights: w,
            eigenvalue: pd.eigenvalue,
        })
    }

    pub fn image_segment(&self, s: &Segment) -> Vec<Segment> {
        let c = &self.charts[s.edge.0];
        if s.from <= s.to {
            c.image_increasing(s.from, s.to)
        } else {
            let mut v = c.image_increasing(s.to, s.from);
            v.reverse();
            v.into_iter().map(Segment::reversed).collect()
        }
    }

    /// `tighten(φ(P))`.
    pub fn image_path(&self, p: &AnchoredPath) -> AnchoredPath {
        let segs: Vec<Segment> = p.segments.iter().flat_map(|s| self.image_segment(s)).collect();
        AnchoredPath {
            segments: tighten_segments(&segs),
        }
    }

    pub fn image_point(&self, map: &GraphMap, p: MetricPoint) -> MetricPoint {
        match p.normalize(map.graph()) {
            MetricPoint::Vertex(v) => MetricPoint::Vertex(map.vertex_image(v)),
            MetricPoint::Edge { edge, pos } => self.charts[edge.0].image_point(map, pos),
        }
    }

    /// Fixed points of `φ^L` strictly inside `e`.
    pub fn fixed_points(&self, e: EdgeId, power: usize) -> Vec<f64> {
        // pieces as (lo, hi, target edge, offset, slope)
        let mut pieces = vec![(0.0, 1.0, e, 0.0, 1.0)];
        for _ in 0..power {
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for &(lo, hi, x, off, sl) in &pieces {
                let c = &self.charts[x.0];
                let mut sub = Vec::with_capacity(c.targets.len());
                for k in 0..c.targets.len() {
                    let (a, b) = (c.breaks[k], c.breaks[k + 1]);
                    let (ta, tb) = ((a - off) / sl, (b - off) / sl);
                    // local(k, y) = α + β y
                    let (alpha, beta) = if c.targets[k].forward {
                        (-a / (b - a), 1.0 / (b - a))
                    } else {
                        (b / (b - a), -1.0 / (b - a))
                    };
                    let (l, h) = if ta <= tb { (ta, tb) } else { (tb, ta) };
                    sub.push((l.max(lo), h.min(hi), c.targets[k].edge, alpha + beta * off, beta * sl));
                }
                if sl < 0.0 {
                    sub.reverse();
                }
                next.extend(sub);
            }
            pieces = next;
        }
        let mut out: Vec<f64> = pieces
            .iter()
            .filter(|p| p.2 == e)
            .map(|&(lo, hi, _, off, sl)| (off / (1.0 - sl), lo, hi))
            .filter(|&(s, lo, hi)| s >= lo - JUNCTION_TOL && s <= hi + JUNCTION_TOL)
            .map(|(s, _, _)| s)
            .filter(|&s| s > JUNCTION_TOL && s < 1.0 - JUNCTION_TOL)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= JUNCTION_TOL);
        out
    }
}

/// `ϖ⁻ⁿ |tighten(φⁿ(P))|`.
pub fn scaled_distance(mm: &MetricMap, path: &AnchoredPath, n: usize) -> f64 {
    let mut p = path.tighten();
    for _ in 0..n {
        p = mm.image_path(&p);
    }
    p.length(&mm.weights) / mm.eigenvalue.powi(n as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDistanceEstimate {
    /// `d₀, …, d_N`.
    pub values: Vec<f64>,
    /// The last `K` drops were all below the tolerance.
    pub stabilized: bool,
    pub estimate: f64,
}

impl LeafDistanceEstimate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,d\n");
        for (n, d) in self.values.iter().enumerate() {
            s.push_str(&format!("{n},{d}\n"));
        }
        s
    }
}

/// Computes `d₀ … d_N` along `path` and checks they never increase.
pub fn leaf_distance(
    mm: &MetricMap,
    path: &AnchoredPath,
    n_max: usize,
    tol: f64,
    k: usize,
) -> Result<LeafDistanceEstimate> {
    if n_max == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let mut p = path.tighten();
    let mut scale = 1.0;
    let mut values = vec![p.length(&mm.weights)];
    for n in 1..=n_max {
        p = mm.image_path(&p);
        scale *= mm.eigenvalue;
        let d = p.length(&mm.weights) / scale;
        let prev = values[n - 1];
        if d > prev + MONOTONE_SLACK * prev.max(1.0) {
            return Err(Error::Monotonicity {
                step: n,
                previous: prev,
                next: d,
            });
        }
        values.push(d);
    }
    let stabilized = values.len() > k
        && values[values.len() - k - 1..]
            .windows(2)
            .all(|w| w[0] - w[1] < tol);
    Ok(LeafDistanceEstimate {
        estimate: *values.last().expect("nonempty"),
        values,
        stabilized,
    })
}

/// `d_N` between two points along the canonical path.
pub fn point_distance(map: &GraphMap, mm: &MetricMap, x: MetricPoint, y: MetricPoint, n: usize) -> f64 {
    scaled_distance(mm, &AnchoredPath::canonical(map.graph(), x, y), n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPoint {
    pub edge: EdgeId,
    pub pos: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSelection {
    pub points: Vec<SelectedPoint>,
    /// Smallest `d_N` between a selected point and the orbit of another.
    pub min_separation: Option<f64>,
}

/// Greedily picks one periodic point inside every edge, trying periods
/// `1, 2, …, cap`, so that each is more than `θ` away in `d_N` from the
/// whole orbit of every earlier choice.
pub fn select_distinct_periodic_points(
    map: &GraphMap,
    mm: &MetricMap,
    n: usize,
    theta: f64,
    cap: usize,
) -> Result<PeriodicSelection> {
    map.ensure_valid()?;
    if !map.is_irreducible()? {
        return Err(Error::NotIrreducible);
    }
    let expanding = map.expanding_edges()?;
    if let Some(e) = map.graph().edges().find(|e| !expanding[e.0]) {
        return Err(Error::NotExpanding(map.graph().edge_name(e).to_string()));
    }
    let g = map.graph();
    let mut chosen: Vec<(SelectedPoint, Vec<MetricPoint>)> = Vec::new();
    let mut min_sep: Option<f64> = None;
    for e in g.edges() {
        let mut seen: Vec<f64> = Vec::new();
        let mut found = None;
        'search: for power in 1..=cap {
            for s in mm.fixed_points(e, power) {
                if seen.iter().any(|t| (t - s).abs() <= JUNCTION_TOL) {
                    continue;
                }
                seen.push(s);
                let x = MetricPoint::Edge { edge: e, pos: s };
                let mut worst = f64::INFINITY;
                for (_, orbit) in &chosen {
                    for z in orbit {
                        worst = worst.min(point_distance(map, mm, x, *z, n));
                    }
                }
                if worst > theta {
                    found = Some((power, s, worst));
                    break 'search;
                }
            }
        }
        let Some((period, pos, worst)) = found else {
            return Err(Error::CandidatesExhausted {
                edge: g.edge_name(e).to_string(),
                cap,
            });
        };
        if worst.is_finite() {
            min_sep = Some(min_sep.map_or(worst, |m: f64| m.min(worst)));
        }
        let mut orbit = vec![MetricPoint::Edge { edge: e, pos }];
        for _ in 1..period {
            let next = mm.image_point(map, *orbit.last().expect("nonempty"));
            orbit.push(next);
        }
        chosen.push((SelectedPoint { edge: e, pos, period }, orbit));
    }
    Ok(PeriodicSelection {
        points: chosen.into_iter().map(|(p, _)| p).collect(),
        min_separation: min_sep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::perron::{perron_eigen, TransitionMatrix, DEFAULT_TOL};

    fn metric(map: &GraphMap) -> MetricMap {
        let pd = perron_eigen(&TransitionMatrix::of(map), DEFAULT_TOL).unwrap();
        MetricMap::new(map, &pd).unwrap()
    }

    #[test]
    fn whole_edges_keep_their_length() {
        for map in [examples::golden(), examples::tribonacci()] {
            let mm = metric(&map);
            for e in map.graph().edges() {
                let p = AnchoredPath::within_edge(e, 0.0, 1.0);
                for n in 0..=10 {
                    let d = scaled_distance(&mm, &p, n);
                    assert!((d - mm.weights[e.0]).abs() < 1e-8, "{e:?} {n} {d}");
                }
            }
        }
    }

    #[test]
    fn half_edge_is_preserved() {
        let map = examples::golden();
        let mm = metric(&map);
        let p = AnchoredPath::within_edge(EdgeId(0), 0.25, 0.75);
        let est = leaf_distance(&mm, &p, 12, 1e-9, 5).unwrap();
        assert!(est.values.iter().all(|d| (d - 0.5).abs() < 1e-9));
        assert!(est.stabilized);
    }

    #[test]
    fn identical_points_are_at_distance_zero() {
        let map = examples::golden();
        let mm = metric(&map);
        let x = MetricPoint::Edge { edge: EdgeId(1), pos: 0.3 };
        assert_eq!(point_distance(&map, &mm, x, x, 5), 0.0);
    }

    #[test]
    fn points_with_equal_images_share_a_leaf() {
        let map = examples::golden();
        let mm = metric(&map);
        let t = 0.4;
        let x = MetricPoint::Edge { edge: EdgeId(0), pos: t };
        let y = MetricPoint::Edge { edge: EdgeId(1), pos: t / mm.eigenvalue };
        assert!(mm.image_point(&map, x).approx_eq(&mm.image_point(&map, y), map.graph()));
        let p = AnchoredPath::canonical(map.graph(), y, x);
        let est = leaf_distance(&mm, &p, 3, 1e-9, 1).unwrap();
        assert!(est.values[0] > 0.1);
        assert!(est.values[1] < 1e-9);
        assert!(est.estimate < 1e-9);
    }

    #[test]
    fn tightening_cancels_backtracks() {
        let segs = [
            Segment { edge: EdgeId(0), from: 0.0, to: 1.0 },
            Segment { edge: EdgeId(1), from: 0.0, to: 1.0 },
            Segment { edge: EdgeId(1), from: 1.0, to: 0.0 },
            Segment { edge: EdgeId(0), from: 1.0, to: 0.5 },
        ];
        assert_eq!(
            tighten_segments(&segs),
            vec![Segment { edge: EdgeId(0), from: 0.0, to: 0.5 }]
        );
        // consecutive loops are not a backtrack
        let loops = [
            Segment { edge: EdgeId(0), from: 0.0, to: 1.0 },
            Segment { edge: EdgeId(0), from: 0.0, to: 1.0 },
        ];
        assert_eq!(tighten_segments(&loops).len(), 2);
    }

    #[test]
    fn canonical_paths_connect() {
        let map = examples::golden_with_bridge();
        let g = map.graph();
        let x = MetricPoint::Edge { edge: EdgeId(0), pos: 0.5 };
        let y = MetricPoint::Edge { edge: EdgeId(1), pos: 0.25 };
        let p = AnchoredPath::canonical(g, x, y);
        let p = AnchoredPath::new(g, p.segments).unwrap();
        assert!(p.segments.first().unwrap().start(g).approx_eq(&x, g));
        assert!(p.segments.last().unwrap().end(g).approx_eq(&y, g));
        // through the bridge c
        assert!(p.segments.iter().any(|s| s.edge == EdgeId(2)));
    }

    #[test]
    fn cancelling_map_still_nonincreasing() {
        let map = GraphMap::rose(&[("a", "a b"), ("b", "b a b")]).unwrap();
        let mm = metric(&map);
        let x = MetricPoint::Edge { edge: EdgeId(0), pos: 0.3 };
        let y = MetricPoint::Edge { edge: EdgeId(1), pos: 0.7 };
        let p = AnchoredPath::canonical(map.graph(), x, y);
        let est = leaf_distance(&mm, &p, 10, 1e-9, 3).unwrap();
        assert!(est.values.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn golden_fixed_points_in_metric_chart() {
        let map = examples::golden();
        let mm = metric(&map);
        assert!(mm.fixed_points(EdgeId(0), 1).is_empty());
        let f3 = mm.fixed_points(EdgeId(0), 3);
        assert_eq!(f3.len(), 1);
        assert!((f3[0] - 0.5).abs() < 1e-9);
        let x = MetricPoint::Edge { edge: EdgeId(0), pos: f3[0] };
        let mut y = x;
        for _ in 0..3 {
            y = mm.image_point(&map, y);
        }
        assert!(y.approx_eq(&x, map.graph()));
    }

    #[test]
    fn golden_selection() {
        let map = examples::golden();
        let mm = metric(&map);
        let sel = select_distinct_periodic_points(&map, &mm, 8, 0.01, 6).unwrap();
        assert_eq!(sel.points.len(), 2);
        assert!(sel.min_separation.unwrap() > 0.01);
    }

    #[test]
    fn single_edge_selection() {
        let map = examples::doubling();
        let mm = metric(&map);
        let sel = select_distinct_periodic_points(&map, &mm, 4, 0.01, 4).unwrap();
        assert_eq!(sel.points.len(), 1);
        assert_eq!(sel.min_separation, None);
    }

    #[test]
    fn large_threshold_exhausts() {
        let map = examples::golden();
        let mm = metric(&map);
        assert!(matches!(
            select_distinct_periodic_points(&map, &mm, 4, 100.0, 4),
            Err(Error::CandidatesExhausted { .. })
        ));
    }
}
