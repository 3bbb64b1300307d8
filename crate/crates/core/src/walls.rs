//! Busts, immersed walls and their approximations.
//!
//! Everything is tracked in the coordinates of the graph `V`. The copy of a
//! level-part that sits one tunnel length away is kept apart from the
//! nucleus by giving its nodes their own identity rather than a second copy
//! of the graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    image_point, is_singular, iterate_point, level, pl_restriction, Level, PLRestriction,
};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, EdgePoint, Point, UnionFind, VertexId};
use crate::map::GraphMap;
use crate::perron::PerronData;
use crate::rational::{self, merge_intervals, rat, Interval, Rat};

/// Starting half-width of a bust.
pub fn initial_delta() -> Rat {
    rat(1, 100)
}

/// How many times the bust width may be halved.
pub const SHRINK_ROUNDS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn opposite(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        })
    }
}

/// A closed interval strictly inside an edge; `q⁻ = lo`, `q⁺ = hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bust {
    pub edge: EdgeId,
    pub interval: Interval,
}

impl Bust {
    pub fn endpoint(&self, s: Sign) -> EdgePoint {
        EdgePoint {
            edge: self.edge,
            pos: match s {
                Sign::Minus => self.interval.lo.clone(),
                Sign::Plus => self.interval.hi.clone(),
            },
        }
    }
}

/// A component of `(φ^L)⁻¹(dᵢ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondaryBust {
    pub primary: usize,
    pub edge: EdgeId,
    pub interval: Interval,
    /// `φ^L` reverses orientation, so `lo` maps to `q⁺`.
    pub reversed: bool,
}

impl SecondaryBust {
    /// The endpoint mapping to `q^s` of the primary bust.
    pub fn endpoint(&self, s: Sign) -> EdgePoint {
        let lo_sign = if self.reversed { Sign::Plus } else { Sign::Minus };
        EdgePoint {
            edge: self.edge,
            pos: if s == lo_sign {
                self.interval.lo.clone()
            } else {
                self.interval.hi.clone()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BustSystem {
    pub power: usize,
    pub busts: Vec<Bust>,
    pub secondary: Vec<SecondaryBust>,
    /// The points the busts were chosen around, when known.
    pub anchors: Vec<EdgePoint>,
}

impl BustSystem {
    /// Wraps given primary busts, computing their secondary busts.
    pub fn from_busts(map: &GraphMap, power: usize, busts: Vec<Bust>) -> Result<Self> {
        if power == 0 {
            return Err(Error::Domain("tunnel length must be at least 1".into()));
        }
        for b in &busts {
            if b.edge.0 >= map.edge_count() {
                return Err(Error::UnknownEdge(format!("#{}", b.edge.0)));
            }
            if !(b.interval.lo > Rat::zero() && b.interval.lo < b.interval.hi && b.interval.hi < Rat::one()) {
                return Err(Error::InvalidBust(format!(
                    "bust on `{}` must satisfy 0 < lo < hi < 1",
                    map.graph().edge_name(b.edge)
                )));
            }
        }
        let pls = restrictions(map, power);
        let secondary = secondary_busts(&pls, &busts);
        Ok(BustSystem {
            power,
            busts,
            secondary,
            anchors: Vec::new(),
        })
    }

    pub fn secondary_of(&self, i: usize) -> impl Iterator<Item = &SecondaryBust> {
        self.secondary.iter().filter(move |s| s.primary == i)
    }
}

fn restrictions(map: &GraphMap, power: usize) -> Vec<PLRestriction> {
    map.graph().edges().map(|e| pl_restriction(map, e, power)).collect()
}

/// Preimages of each bust under `φ^L`, one per piece mapping over its edge.
pub fn secondary_busts(pls: &[PLRestriction], busts: &[Bust]) -> Vec<SecondaryBust> {
    let mut out = Vec::new();
    for (i, b) in busts.iter().enumerate() {
        for r in pls {
            for piece in r.pieces.iter().filter(|p| p.target.edge == b.edge) {
                out.push(SecondaryBust {
                    primary: i,
                    edge: r.edge,
                    interval: Interval::new(piece.invert(&b.interval.lo), piece.invert(&b.interval.hi)),
                    reversed: !piece.target.forward,
                });
            }
        }
    }
    out
}

/// One named verification with an optional counterexample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

impl Check {
    fn new(name: &str, failure: Option<String>) -> Check {
        Check {
            name: name.to_string(),
            passed: failure.is_none(),
            witness: failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name)?;
            if let Some(w) = &c.witness {
                write!(f, ": {w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub const DISJOINT_FROM_SECONDARY: &str = "busts are disjoint from secondary busts";
pub const NEAR_PREIMAGES: &str = "secondary busts lie near the anchor preimages";
pub const REGULAR_ENDPOINTS: &str = "bust endpoints are nonsingular";
pub const ANCHOR_ENDPOINT: &str = "anchors are bust endpoints where allowed";
pub const EMBEDS: &str = "the tunnel power embeds each bust";
pub const DISJOINT_IMAGES: &str = "bust images are pairwise disjoint";

fn show(map: &GraphMap, e: EdgeId, iv: &Interval) -> String {
    format!(
        "{}[{}, {}]",
        map.graph().edge_name(e),
        rational::fmt_rat(&iv.lo),
        rational::fmt_rat(&iv.hi)
    )
}

/// `φ^L(x)` is a different point from `x` and `x` never hits a vertex
/// within the singularity bound, so the anchor may sit on the bust boundary.
fn anchor_may_touch(map: &GraphMap, power: usize, x: &EdgePoint) -> bool {
    let p = Point::Edge(x.clone());
    !is_singular(map, &p, 4 * power).singular_within_bound && iterate_point(map, &p, power) != p
}

/// The piece of `pls[e]` whose open domain contains `iv`, if any.
fn embedding_piece<'a>(pls: &'a [PLRestriction], e: EdgeId, iv: &Interval) -> Option<&'a crate::dynamics::Piece> {
    pls[e.0]
        .pieces
        .iter()
        .find(|p| p.domain.lo < iv.lo && iv.hi < p.domain.hi)
}

fn image_interval(pls: &[PLRestriction], b: &Bust) -> Option<(EdgeId, Interval)> {
    let p = embedding_piece(pls, b.edge, &b.interval)?;
    Some((p.target.edge, Interval::new(p.apply(&b.interval.lo), p.apply(&b.interval.hi))))
}

/// Verifies the six bust properties.
pub fn check_busts(
    map: &GraphMap,
    sys: &BustSystem,
    eps: Option<&Rat>,
) -> CheckReport {
    let pls = restrictions(map, sys.power);
    evaluate(map, sys.power, &pls, &sys.busts, &sys.anchors, eps)
}

fn evaluate(
    map: &GraphMap,
    power: usize,
    pls: &[PLRestriction],
    busts: &[Bust],
    anchors: &[EdgePoint],
    eps: Option<&Rat>,
) -> CheckReport {
    let secondary = secondary_busts(pls, busts);
    let mut checks = Vec::new();

    let mut fail = None;
    'outer: for (i, b) in busts.iter().enumerate() {
        for s in secondary.iter().filter(|s| s.edge == b.edge) {
            if b.interval.meets(&s.interval) {
                fail = Some(format!(
                    "bust {i} {} meets a preimage {} of bust {}",
                    show(map, b.edge, &b.interval),
                    show(map, s.edge, &s.interval),
                    s.primary
                ));
                break 'outer;
            }
        }
    }
    checks.push(Check::new(DISJOINT_FROM_SECONDARY, fail));

    let mut fail = None;
    if let Some(eps) = eps {
        'outer: for (i, b) in busts.iter().enumerate() {
            let Some(x) = anchors.get(i) else { continue };
            for r in pls {
                for piece in r.pieces.iter().filter(|p| p.target.edge == b.edge) {
                    let y = piece.invert(&x.pos);
                    let iv = Interval::new(piece.invert(&b.interval.lo), piece.invert(&b.interval.hi));
                    let far = rational::abs(&(&iv.lo - &y)).max(rational::abs(&(&iv.hi - &y)));
                    if &far > eps {
                        fail = Some(format!(
                            "preimage {} of bust {i} is {} from the anchor preimage",
                            show(map, r.edge, &iv),
                            rational::fmt_rat(&far)
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }
    checks.push(Check::new(NEAR_PREIMAGES, fail));

    let mut fail = None;
    'outer: for (i, b) in busts.iter().enumerate() {
        for s in [Sign::Minus, Sign::Plus] {
            let v = is_singular(map, &Point::Edge(b.endpoint(s)), 4 * power);
            if let Some(k) = v.hit {
                fail = Some(format!("endpoint q{s} of bust {i} reaches a vertex after {k} steps"));
                break 'outer;
            }
        }
    }
    checks.push(Check::new(REGULAR_ENDPOINTS, fail));

    let mut fail = None;
    for (i, (b, x)) in busts.iter().zip(anchors).enumerate() {
        let touches = b.interval.lo == x.pos || b.interval.hi == x.pos;
        if anchor_may_touch(map, power, x) && !touches {
            fail = Some(format!("anchor {i} is not an endpoint of its bust"));
            break;
        }
    }
    checks.push(Check::new(ANCHOR_ENDPOINT, fail));

    let fail = busts.iter().enumerate().find_map(|(i, b)| {
        embedding_piece(pls, b.edge, &b.interval)
            .is_none()
            .then(|| format!("bust {i} {} crosses a breakpoint", show(map, b.edge, &b.interval)))
    });
    checks.push(Check::new(EMBEDS, fail));

    let images: Vec<_> = busts.iter().map(|b| image_interval(pls, b)).collect();
    let mut fail = None;
    'outer: for i in 0..busts.len() {
        for j in i + 1..busts.len() {
            if let (Some((e, a)), Some((f, c))) = (&images[i], &images[j]) {
                if e == f && a.meets(c) {
                    fail = Some(format!(
                        "images {} and {} of busts {i} and {j} meet",
                        show(map, *e, a),
                        show(map, *f, c)
                    ));
                    break 'outer;
                }
            }
        }
    }
    checks.push(Check::new(DISJOINT_IMAGES, fail));
    CheckReport { checks }
}

/// Chooses one bust near each anchor so that every bust property holds,
/// halving the width until it does.
pub fn choose_busts(
    map: &GraphMap,
    power: usize,
    anchors: &[EdgePoint],
    eps: Option<&Rat>,
) -> Result<BustSystem> {
    map.ensure_valid()?;
    if power == 0 {
        return Err(Error::Domain("tunnel length must be at least 1".into()));
    }
    if anchors.is_empty() {
        return Err(Error::InvalidBust("at least one anchor is required".into()));
    }
    let expanding = map.expanding_edges()?;
    let mut edges = BTreeSet::new();
    for x in anchors {
        let name = map.graph().edge_name(x.edge).to_string();
        if !edges.insert(x.edge) {
            return Err(Error::InvalidBust(format!("two anchors on edge `{name}`")));
        }
        if x.pos <= Rat::zero() || x.pos >= Rat::one() {
            return Err(Error::InvalidBust(format!("anchor on `{name}` is not interior")));
        }
        if !expanding[x.edge.0] {
            return Err(Error::NotExpanding(name));
        }
    }
    let images: Vec<Point> = anchors
        .iter()
        .map(|x| iterate_point(map, &Point::Edge(x.clone()), power))
        .collect();
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            if images[i] == images[j] {
                return Err(Error::CoincidentAnchorImages(i, j));
            }
        }
    }
    let pls = restrictions(map, power);
    let touch: Vec<bool> = anchors.iter().map(|x| anchor_may_touch(map, power, x)).collect();
    let mut delta = initial_delta();
    'round: for _ in 0..SHRINK_ROUNDS {
        let mut chosen: Vec<Bust> = Vec::new();
        for (i, x) in anchors.iter().enumerate() {
            let two = &delta + &delta;
            let options = if touch[i] {
                [
                    Interval::new(x.pos.clone(), &x.pos + &delta),
                    Interval::new(&x.pos - &delta, x.pos.clone()),
                ]
            } else {
                [
                    Interval::new(&x.pos + &delta, &x.pos + &two),
                    Interval::new(&x.pos - &two, &x.pos - &delta),
                ]
            };
            let accepted = options
                .into_iter()
                .filter(|iv| iv.lo > Rat::zero() && iv.hi < Rat::one())
                .find(|iv| {
                    let mut trial = chosen.clone();
                    trial.push(Bust {
                        edge: x.edge,
                        interval: iv.clone(),
                    });
                    evaluate(map, power, &pls, &trial, &anchors[..=i], eps).all_passed()
                });
            match accepted {
                Some(iv) => chosen.push(Bust {
                    edge: x.edge,
                    interval: iv,
                }),
                None => {
                    delta /= rat(2, 1);
                    continue 'round;
                }
            }
        }
        let secondary = secondary_busts(&pls, &chosen);
        return Ok(BustSystem {
            power,
            busts: chosen,
            secondary,
            anchors: anchors.to_vec(),
        });
    }
    Err(Error::BustsNotFound {
        rounds: SHRINK_ROUNDS,
    })
}

/// A closed piece of an edge left in the nucleus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub edge: EdgeId,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tunnel {
    pub bust: usize,
    pub sign: Sign,
    /// Rooted at `q^sign`, pruned to the forward paths of full length.
    pub level: Level,
    /// Where the slope lands: `p^{-sign}`.
    pub slope_end: EdgePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WallNode {
    Vertex(VertexId),
    /// A nucleus point at a bust endpoint.
    Boundary(EdgePoint),
    /// A node of a level-part; these live in the shifted copy.
    Level { tunnel: usize, index: usize },
    /// The point where the two slopes of a bust cross.
    Crossing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WallEdgeKind {
    Fragment(usize),
    Level(usize),
    Slope(usize),
    Attachment(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallEdge {
    pub a: usize,
    pub b: usize,
    pub kind: WallEdgeKind,
}

/// The graph of an immersed wall system: nucleus fragments, tunnels made of
/// level-parts and slopes, and the gluing between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallGraph {
    pub busts: BustSystem,
    pub fragments: Vec<Fragment>,
    pub tunnels: Vec<Tunnel>,
    pub nodes: Vec<WallNode>,
    pub edges: Vec<WallEdge>,
    /// Immersed wall containing each node.
    pub component_of: Vec<usize>,
    pub component_count: usize,
    /// Nucleus component containing each fragment.
    pub fragment_component: Vec<usize>,
    pub nucleus_component_count: usize,
}

fn components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, usize) {
    let mut uf = UnionFind::new(n);
    for (a, b) in edges {
        uf.union(a, b);
    }
    let mut label = BTreeMap::new();
    let of: Vec<usize> = (0..n)
        .map(|i| {
            let r = uf.find(i);
            let next = label.len();
            *label.entry(r).or_insert(next)
        })
        .collect();
    (of, label.len())
}

fn node_at(nodes: &mut Vec<WallNode>, index: &mut BTreeMap<Point, usize>, p: Point) -> usize {
    *index.entry(p.clone()).or_insert_with(|| {
        nodes.push(match p {
            Point::Vertex(v) => WallNode::Vertex(v),
            Point::Edge(ep) => WallNode::Boundary(ep),
        });
        nodes.len() - 1
    })
}

/// Glues the tunnels onto the nucleus.
pub fn build_wall(map: &GraphMap, busts: &BustSystem) -> Result<WallGraph> {
    map.ensure_valid()?;
    if busts.busts.is_empty() {
        return Err(Error::InvalidBust("a wall requires at least one primary bust".into()));
    }
    let g = map.graph();
    let mut removed: Vec<Vec<Interval>> = vec![Vec::new(); g.edge_count()];
    for b in &busts.busts {
        removed[b.edge.0].push(b.interval.clone());
    }
    for s in &busts.secondary {
        removed[s.edge.0].push(s.interval.clone());
    }
    let mut fragments = Vec::new();
    for e in g.edges() {
        let mut start = Rat::zero();
        for iv in merge_intervals(std::mem::take(&mut removed[e.0])) {
            fragments.push(Fragment {
                edge: e,
                interval: Interval::new(start, iv.lo),
            });
            start = iv.hi;
        }
        fragments.push(Fragment {
            edge: e,
            interval: Interval::new(start, Rat::one()),
        });
    }

    let mut nodes = Vec::new();
    let mut index: BTreeMap<Point, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for (k, f) in fragments.iter().enumerate() {
        let a = node_at(&mut nodes, &mut index, Point::on_edge(g, f.edge, f.interval.lo.clone()));
        let b = node_at(&mut nodes, &mut index, Point::on_edge(g, f.edge, f.interval.hi.clone()));
        edges.push(WallEdge {
            a,
            b,
            kind: WallEdgeKind::Fragment(k),
        });
    }
    let nucleus_nodes = nodes.len();
    let (node_comp, _) = components(
        nucleus_nodes,
        edges.iter().map(|e| (e.a, e.b)),
    );
    let mut frag_label = BTreeMap::new();
    let fragment_component: Vec<usize> = edges
        .iter()
        .map(|e| {
            let next = frag_label.len();
            *frag_label.entry(node_comp[e.a]).or_insert(next)
        })
        .collect();

    let crossings: Vec<usize> = (0..busts.busts.len())
        .map(|i| {
            nodes.push(WallNode::Crossing(i));
            nodes.len() - 1
        })
        .collect();

    let mut tunnels = Vec::new();
    for (i, b) in busts.busts.iter().enumerate() {
        for sign in [Sign::Minus, Sign::Plus] {
            let t = tunnels.len();
            let root = Point::Edge(b.endpoint(sign));
            let lv = level(map, &root, busts.power).pruned();
            if lv.nodes.iter().any(|n| n.point.is_vertex()) {
                return Err(Error::LevelHitsVertex { bust: i });
            }
            let first = nodes.len();
            for (k, n) in lv.nodes.iter().enumerate() {
                nodes.push(WallNode::Level { tunnel: t, index: k });
                if let Some(p) = n.parent {
                    edges.push(WallEdge {
                        a: first + k,
                        b: first + p,
                        kind: WallEdgeKind::Level(t),
                    });
                }
                if n.depth == busts.power {
                    if let Some(&target) = index.get(&n.point) {
                        edges.push(WallEdge {
                            a: first + k,
                            b: target,
                            kind: WallEdgeKind::Attachment(t),
                        });
                    }
                }
            }
            let slope_end = b.endpoint(sign.opposite());
            // overlapping busts can swallow an endpoint; it then stands alone
            let end = node_at(&mut nodes, &mut index, Point::Edge(slope_end.clone()));
            edges.push(WallEdge {
                a: first,
                b: crossings[i],
                kind: WallEdgeKind::Slope(t),
            });
            edges.push(WallEdge {
                a: crossings[i],
                b: end,
                kind: WallEdgeKind::Slope(t),
            });
            tunnels.push(Tunnel {
                bust: i,
                sign,
                level: lv,
                slope_end,
            });
        }
    }
    let (component_of, component_count) = components(nodes.len(), edges.iter().map(|e| (e.a, e.b)));
    Ok(WallGraph {
        busts: busts.clone(),
        fragments,
        tunnels,
        nodes,
        edges,
        component_of,
        component_count,
        fragment_component,
        nucleus_component_count: frag_label.len(),
    })
}

impl WallGraph {
    /// Maximal connected pieces avoiding slope interiors, as node lists.
    pub fn knockouts(&self) -> Vec<Vec<usize>> {
        let (of, count) = components(
            self.nodes.len(),
            self.edges
                .iter()
                .filter(|e| !matches!(e.kind, WallEdgeKind::Slope(_)))
                .map(|e| (e.a, e.b)),
        );
        let mut out = vec![Vec::new(); count];
        for (i, c) in of.into_iter().enumerate() {
            if !matches!(self.nodes[i], WallNode::Crossing(_)) {
                out[c].push(i);
            }
        }
        out.retain(|k| !k.is_empty());
        out
    }

    fn level_cells(&self, t: usize) -> BTreeSet<(usize, Point)> {
        self.tunnels[t]
            .level
            .nodes
            .iter()
            .map(|n| (n.depth, n.point.clone()))
            .collect()
    }
}

pub const TUNNELS_DISJOINT: &str = "tunnels at distinct busts are disjoint";
pub const OPPOSITE_TUNNELS_MEET_ONCE: &str = "opposite tunnels meet in a single point";
pub const LEVELS_AVOID_VERTICES: &str = "level-parts contain no vertex";
pub const ENDPOINTS_REGULAR: &str = "bust endpoints are regular";
pub const INCIDENCE: &str = "tunnels attach to the nucleus consistently";

/// Verifies the structural invariants of a wall graph.
pub fn check_wall(map: &GraphMap, wall: &WallGraph) -> CheckReport {
    let g = map.graph();
    let sys = &wall.busts;
    let mut checks = Vec::new();

    let cells: Vec<_> = (0..wall.tunnels.len()).map(|t| wall.level_cells(t)).collect();
    let mut fail = None;
    'outer: for t in 0..wall.tunnels.len() {
        for u in t + 1..wall.tunnels.len() {
            let (bt, bu) = (wall.tunnels[t].bust, wall.tunnels[u].bust);
            if bt == bu {
                continue;
            }
            let (dt, du) = (&sys.busts[bt], &sys.busts[bu]);
            if dt.edge == du.edge && dt.interval.meets(&du.interval) {
                fail = Some(format!(
                    "busts {bt} and {bu} overlap: {} and {}",
                    show(map, dt.edge, &dt.interval),
                    show(map, du.edge, &du.interval)
                ));
                break 'outer;
            }
            if let Some((d, p)) = cells[t].intersection(&cells[u]).next() {
                fail = Some(format!(
                    "tunnels {t} and {u} share {} at depth {d}",
                    g.format_point(p)
                ));
                break 'outer;
            }
        }
    }
    checks.push(Check::new(TUNNELS_DISJOINT, fail));

    let mut fail = None;
    for (i, b) in sys.busts.iter().enumerate() {
        let pair: Vec<usize> = (0..wall.tunnels.len()).filter(|&t| wall.tunnels[t].bust == i).collect();
        if pair.len() != 2 || b.interval.lo >= b.interval.hi {
            fail = Some(format!("bust {i} does not carry two distinct slopes"));
            break;
        }
        if let Some((d, p)) = cells[pair[0]].intersection(&cells[pair[1]]).next() {
            fail = Some(format!(
                "both tunnels of bust {i} contain {} at depth {d}",
                g.format_point(p)
            ));
            break;
        }
    }
    checks.push(Check::new(OPPOSITE_TUNNELS_MEET_ONCE, fail));

    let fail = wall.tunnels.iter().enumerate().find_map(|(t, tn)| {
        tn.level
            .nodes
            .iter()
            .find(|n| n.point.is_vertex())
            .map(|n| format!("tunnel {t} reaches {} at depth {}", g.format_point(&n.point), n.depth))
    });
    checks.push(Check::new(LEVELS_AVOID_VERTICES, fail));

    let mut fail = None;
    'outer: for (i, b) in sys.busts.iter().enumerate() {
        for s in [Sign::Minus, Sign::Plus] {
            if let Some(k) = is_singular(map, &Point::Edge(b.endpoint(s)), 4 * sys.power).hit {
                fail = Some(format!("q{s} of bust {i} reaches a vertex after {k} steps"));
                break 'outer;
            }
        }
    }
    checks.push(Check::new(ENDPOINTS_REGULAR, fail));

    checks.push(Check::new(INCIDENCE, incidence_failure(map, wall)));
    CheckReport { checks }
}

fn incidence_failure(map: &GraphMap, wall: &WallGraph) -> Option<String> {
    let g = map.graph();
    let sys = &wall.busts;
    let mut attached: BTreeMap<usize, usize> = BTreeMap::new();
    for (t, tn) in wall.tunnels.iter().enumerate() {
        let expected: BTreeSet<Point> = sys
            .secondary_of(tn.bust)
            .map(|s| Point::Edge(s.endpoint(tn.sign)))
            .collect();
        let mut got = BTreeSet::new();
        for e in &wall.edges {
            if e.kind != WallEdgeKind::Attachment(t) {
                continue;
            }
            *attached.entry(e.b).or_default() += 1;
            let WallNode::Boundary(p) = &wall.nodes[e.b] else {
                return Some(format!("tunnel {t} attaches away from a bust endpoint"));
            };
            got.insert(Point::Edge(p.clone()));
        }
        let leaves = tn.level.at_depth(sys.power).count();
        if got != expected || leaves != expected.len() {
            return Some(format!(
                "tunnel {t} has {leaves} leaves and {} attachments for {} secondary endpoints",
                got.len(),
                expected.len()
            ));
        }
        let end = Point::Edge(tn.slope_end.clone());
        let lands = wall.edges.iter().any(|e| {
            e.kind == WallEdgeKind::Slope(t)
                && matches!(&wall.nodes[e.b], WallNode::Boundary(p) if Point::Edge(p.clone()) == end)
        });
        if !lands {
            return Some(format!("slope of tunnel {t} does not reach {}", g.format_point(&end)));
        }
    }
    attached
        .into_iter()
        .find(|&(_, n)| n > 1)
        .map(|(node, n)| format!("nucleus node {node} carries {n} tunnel leaves"))
}

/// Image of one nucleus component under `φ^L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NucleusImage {
    pub component: usize,
    pub intervals: Vec<(EdgeId, Interval)>,
}

/// A slope sent to its bust followed by the forward path of its endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlopeImage {
    pub tunnel: usize,
    pub bust: usize,
    pub sign: Sign,
    pub interval: Interval,
    /// `p, φ(p), …, φ^L(p)`.
    pub orbit: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallApproximation {
    pub power: usize,
    pub nuclei: Vec<NucleusImage>,
    pub slopes: Vec<SlopeImage>,
    /// Slopes rooted at different busts have disjoint images.
    pub slopes_disjoint: bool,
    pub slope_overlap: Option<(usize, usize, usize)>,
}

/// Images of nucleus fragments under `φ^L`, merged per component.
pub fn approximate_wall(map: &GraphMap, wall: &WallGraph) -> Result<WallApproximation> {
    let power = wall.busts.power;
    let pls = restrictions(map, power);
    let mut per: Vec<Vec<(EdgeId, Interval)>> = vec![Vec::new(); wall.nucleus_component_count];
    for (k, f) in wall.fragments.iter().enumerate() {
        for piece in &pls[f.edge.0].pieces {
            let lo = (&f.interval.lo).max(&piece.domain.lo).clone();
            let hi = (&f.interval.hi).min(&piece.domain.hi).clone();
            if lo < hi {
                per[wall.fragment_component[k]].push((
                    piece.target.edge,
                    Interval::new(piece.apply(&lo), piece.apply(&hi)),
                ));
            }
        }
    }
    let mut nuclei = Vec::new();
    for (c, ivs) in per.into_iter().enumerate() {
        let mut by_edge: BTreeMap<EdgeId, Vec<Interval>> = BTreeMap::new();
        for (e, iv) in ivs {
            by_edge.entry(e).or_default().push(iv);
        }
        let intervals: Vec<(EdgeId, Interval)> = by_edge
            .into_iter()
            .flat_map(|(e, v)| merge_intervals(v).into_iter().map(move |iv| (e, iv)))
            .collect();
        for (i, b) in wall.busts.busts.iter().enumerate() {
            if intervals
                .iter()
                .any(|(e, iv)| *e == b.edge && iv.meets_interior(&b.interval))
            {
                return Err(Error::AvoidsBustViolated { bust: i });
            }
        }
        nuclei.push(NucleusImage {
            component: c,
            intervals,
        });
    }

    let slopes: Vec<SlopeImage> = wall
        .tunnels
        .iter()
        .enumerate()
        .map(|(t, tn)| {
            let mut orbit = vec![Point::Edge(tn.slope_end.clone())];
            for _ in 0..power {
                let next = image_point(map, orbit.last().expect("nonempty"));
                orbit.push(next);
            }
            SlopeImage {
                tunnel: t,
                bust: tn.bust,
                sign: tn.sign,
                interval: wall.busts.busts[tn.bust].interval.clone(),
                orbit,
            }
        })
        .collect();
    let mut overlap = None;
    'outer: for s in 0..slopes.len() {
        for u in s + 1..slopes.len() {
            let (a, b) = (&slopes[s], &slopes[u]);
            if a.bust == b.bust {
                continue;
            }
            let (ea, eb) = (wall.busts.busts[a.bust].edge, wall.busts.busts[b.bust].edge);
            if ea == eb && a.interval.meets(&b.interval) {
                overlap = Some((s, u, 0));
                break 'outer;
            }
            if let Some(k) = (0..=power).find(|&k| a.orbit[k] == b.orbit[k]) {
                overlap = Some((s, u, k));
                break 'outer;
            }
        }
    }
    Ok(WallApproximation {
        power,
        nuclei,
        slopes,
        slopes_disjoint: overlap.is_none(),
        slope_overlap: overlap,
    })
}

/// Whether `V` with the open primary busts removed is a forest.
pub fn v_flat_is_forest(map: &GraphMap, busts: &[Bust]) -> bool {
    let g = map.graph();
    let cut: BTreeSet<EdgeId> = busts.iter().map(|b| b.edge).collect();
    let mut uf = UnionFind::new(g.vertex_count());
    g.edges()
        .filter(|e| !cut.contains(e))
        .all(|e| uf.union(g.edge(e).init.0, g.edge(e).term.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowZoneBound {
    pub chi: f64,
    pub max_edge: f64,
    pub bound: usize,
}

/// Least integer `L ≥ 1` with `L > 4 (log_ϖ max_edge − log_ϖ χ)`.
pub fn narrow_zone_bound(varpi: f64, max_edge: f64, chi: f64) -> Result<usize> {
    let in_domain = varpi > 1.0 && max_edge > 0.0 && chi > 0.0;
    if !in_domain {
        return Err(Error::Domain(
            "need expansion factor > 1 and positive lengths".into(),
        ));
    }
    let x = 4.0 * (max_edge.ln() - chi.ln()) / varpi.ln();
    let near = x.round();
    let floor = if (x - near).abs() < 1e-9 { near } else { x.floor() };
    Ok(((floor + 1.0).max(1.0)) as usize)
}

/// Tunnel length bound from the orbits of periodic anchors, each given with
/// its period. `χᵢ` is the least weighted distance from the orbit of the
/// `i`-th anchor to a vertex and `χ` is the largest of these.
pub fn min_tunnel_length_narrow_zones(
    map: &GraphMap,
    pd: &PerronData,
    anchors: &[(EdgePoint, usize)],
) -> Result<NarrowZoneBound> {
    if anchors.is_empty() {
        return Err(Error::Domain("at least one anchor is required".into()));
    }
    let w = &pd.weights;
    let mut chi = 0.0f64;
    for (i, (x, period)) in anchors.iter().enumerate() {
        if *period == 0 {
            return Err(Error::NotPeriodic(i));
        }
        let start = Point::Edge(x.clone());
        let mut p = start.clone();
        let mut chi_i = f64::INFINITY;
        for _ in 0..*period {
            let Point::Edge(ep) = &p else {
                return Err(Error::NotPeriodic(i));
            };
            let t = rational::to_f64(&ep.pos);
            chi_i = chi_i.min(t.min(1.0 - t) * w.get(ep.edge)?);
            p = image_point(map, &p);
        }
        if p != start {
            return Err(Error::NotPeriodic(i));
        }
        chi = chi.max(chi_i);
    }
    let max_edge = w.max();
    Ok(NarrowZoneBound {
        chi,
        max_edge,
        bound: narrow_zone_bound(pd.eigenvalue, max_edge, chi)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubulationConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub l0: f64,
}

/// Quasiconvexity constants and the tunnel length threshold.
pub fn cubulation_constants(
    lambda1: f64,
    lambda2: f64,
    mu1: f64,
    mu2: f64,
    delta: f64,
    b: f64,
) -> Result<CubulationConstants> {
    let all = [lambda1, lambda2, mu1, mu2, delta, b];
    if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Domain("constants must be finite and nonnegative".into()));
    }
    if lambda1 < 1.0 || mu1 < 1.0 {
        return Err(Error::Domain("λ1 and μ1 must be at least 1".into()));
    }
    let l0 = (12.0 * (delta + b)).max(2.0 * lambda1 * (lambda2 + mu2) + 1.0);
    let kappa1 = 4.0 * lambda1 * mu1;
    let kappa2 = mu2 / 2.0 + 2.0 * l0 * (1.0 + 1.0 / kappa1);
    Ok(CubulationConstants { kappa1, kappa2, l0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::perron::{perron_eigen, TransitionMatrix, DEFAULT_TOL};

    fn ep(e: usize, n: i64, d: i64) -> EdgePoint {
        EdgePoint {
            edge: EdgeId(e),
            pos: rat(n, d),
        }
    }

    #[test]
    fn golden_bust_at_fixed_anchor() {
        let m = examples::golden();
        let sys = choose_busts(&m, 3, &[ep(0, 1, 3)], None).unwrap();
        let third = rat(1, 3);
        assert_eq!(
            sys.busts[0].interval,
            Interval::new(&third + rat(1, 100), &third + rat(1, 50))
        );
        let on_a: Vec<_> = sys.secondary.iter().filter(|s| s.edge == EdgeId(0)).collect();
        assert_eq!(on_a.len(), 1);
        assert_eq!(
            on_a[0].interval,
            Interval::new(&third + rat(1, 400), &third + rat(1, 200))
        );
        assert!(!on_a[0].interval.meets(&sys.busts[0].interval));
        assert!(check_busts(&m, &sys, None).all_passed());
    }

    #[test]
    fn first_power_has_no_fixed_points_in_a() {
        let m = examples::golden();
        let sys = choose_busts(&m, 1, &[ep(0, 2, 5)], None).unwrap();
        // a(2/5) is not fixed, so the bust touches it
        assert_eq!(sys.busts[0].interval.lo, rat(2, 5));
        assert!(check_busts(&m, &sys, None).all_passed());
    }

    #[test]
    fn coincident_images_are_rejected() {
        let m = examples::golden();
        // a(1/2) and b(1/4) both map to b(1/2)
        assert_eq!(
            choose_busts(&m, 1, &[ep(0, 1, 2), ep(1, 1, 4)], None),
            Err(Error::CoincidentAnchorImages(0, 1))
        );
    }

    #[test]
    fn secondary_busts_round_trip() {
        let m = examples::tribonacci();
        let sys = choose_busts(&m, 4, &[ep(0, 2, 7), ep(2, 3, 5)], None).unwrap();
        let again = BustSystem::from_busts(&m, 4, sys.busts.clone()).unwrap();
        assert_eq!(again.secondary, sys.secondary);
        for s in &sys.secondary {
            for sign in [Sign::Minus, Sign::Plus] {
                assert_eq!(
                    iterate_point(&m, &Point::Edge(s.endpoint(sign)), 4),
                    Point::Edge(sys.busts[s.primary].endpoint(sign))
                );
            }
        }
    }

    #[test]
    fn locality_is_enforced() {
        let m = examples::golden();
        let eps = rat(1, 1000);
        let sys = choose_busts(&m, 2, &[ep(1, 3, 7)], Some(&eps)).unwrap();
        let report = check_busts(&m, &sys, Some(&eps));
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn golden_wall_checks_pass() {
        let m = examples::golden();
        let sys = choose_busts(&m, 3, &[ep(0, 1, 3), ep(1, 2, 7)], None).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        let report = check_wall(&m, &wall);
        assert!(report.all_passed(), "{report}");
        let removed = sys.busts.len() + sys.secondary.len();
        assert_eq!(wall.fragments.len(), m.edge_count() + removed);
        let approx = approximate_wall(&m, &wall).unwrap();
        assert!(approx.slopes_disjoint);
    }

    #[test]
    fn single_bust_wall() {
        let m = examples::golden();
        let sys = choose_busts(&m, 2, &[ep(1, 2, 7)], None).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        assert_eq!(wall.fragments.len(), 2 + 1 + sys.secondary.len());
        assert!(wall.component_count >= 1);
        assert!(check_wall(&m, &wall).all_passed());
        assert!(!wall.knockouts().is_empty());
    }

    #[test]
    fn zero_busts_are_rejected() {
        let m = examples::golden();
        let sys = BustSystem::from_busts(&m, 2, vec![]).unwrap();
        assert!(matches!(build_wall(&m, &sys), Err(Error::InvalidBust(_))));
    }

    #[test]
    fn overlapping_busts_fail_disjointness() {
        let m = examples::golden();
        let busts = vec![
            Bust {
                edge: EdgeId(0),
                interval: Interval::new(rat(3, 10), rat(4, 10)),
            },
            Bust {
                edge: EdgeId(0),
                interval: Interval::new(rat(35, 100), rat(45, 100)),
            },
        ];
        let sys = BustSystem::from_busts(&m, 2, busts).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        let report = check_wall(&m, &wall);
        let c = report.get(TUNNELS_DISJOINT).unwrap();
        assert!(!c.passed);
        assert!(c.witness.as_ref().unwrap().contains("overlap"));
    }

    #[test]
    fn singular_endpoint_is_reported() {
        let m = examples::golden();
        // b(1/2) maps to the vertex
        let busts = vec![Bust {
            edge: EdgeId(1),
            interval: Interval::new(rat(1, 2), rat(5, 9)),
        }];
        let sys = BustSystem::from_busts(&m, 2, busts).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        let report = check_wall(&m, &wall);
        assert!(!report.get(ENDPOINTS_REGULAR).unwrap().passed);
    }

    #[test]
    fn nucleus_images_avoid_busts() {
        let m = examples::tribonacci();
        let sys = choose_busts(&m, 3, &[ep(0, 2, 7)], None).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        let approx = approximate_wall(&m, &wall).unwrap();
        assert_eq!(approx.nuclei.len(), wall.nucleus_component_count);
        for s in &approx.slopes {
            assert_eq!(s.orbit.len(), 4);
            assert_eq!(
                s.orbit[3],
                iterate_point(&m, &Point::Edge(wall.tunnels[s.tunnel].slope_end.clone()), 3)
            );
        }
    }

    #[test]
    fn golden_slope_orbit() {
        let m = examples::golden();
        let sys = choose_busts(&m, 3, &[ep(0, 1, 3)], None).unwrap();
        let wall = build_wall(&m, &sys).unwrap();
        let approx = approximate_wall(&m, &wall).unwrap();
        let edges: Vec<usize> = approx.slopes[0]
            .orbit
            .iter()
            .map(|p| p.as_edge_point().unwrap().edge.0)
            .collect();
        assert_eq!(edges, vec![0, 1, 1, 0]);
    }

    #[test]
    fn narrow_zone_formula() {
        assert_eq!(narrow_zone_bound(2.0, 1.0, 0.125).unwrap(), 13);
        assert_eq!(narrow_zone_bound(1.7, 2.5, 2.5).unwrap(), 1);
        assert!(narrow_zone_bound(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn golden_narrow_zone() {
        let m = examples::golden();
        let pd = perron_eigen(&TransitionMatrix::of(&m), DEFAULT_TOL).unwrap();
        let nz = min_tunnel_length_narrow_zones(&m, &pd, &[(ep(0, 1, 3), 3)]).unwrap();
        // orbit a(1/3) -> b(1/3) -> b(2/3) -> a(1/3)
        let phi = pd.eigenvalue;
        let chi = (1.0f64 / 3.0).min(phi / 3.0);
        assert!((nz.chi - chi).abs() < 1e-12);
        let direct = 4.0 * (phi.ln() - chi.ln()) / phi.ln();
        assert_eq!(nz.bound, direct.floor() as usize + 1);
        assert_eq!(
            min_tunnel_length_narrow_zones(&m, &pd, &[(ep(0, 1, 3), 2)]),
            Err(Error::NotPeriodic(0))
        );
    }

    #[test]
    fn constants() {
        let c = cubulation_constants(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!((c.kappa1, c.kappa2, c.l0), (4.0, 60.0, 24.0));
        let c = cubulation_constants(1.0, 0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!((c.kappa1, c.kappa2, c.l0), (4.0, 2.5, 1.0));
        let c3 = cubulation_constants(3.0, 0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(c3.kappa1, 12.0);
        assert!(cubulation_constants(0.5, 0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(cubulation_constants(1.0, -1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn forest_check() {
        let m = examples::golden();
        let a = Bust {
            edge: EdgeId(0),
            interval: Interval::new(rat(1, 4), rat(1, 2)),
        };
        let b = Bust {
            edge: EdgeId(1),
            interval: Interval::new(rat(1, 4), rat(1, 2)),
        };
        assert!(!v_flat_is_forest(&m, std::slice::from_ref(&a)));
        assert!(v_flat_is_forest(&m, &[a, b]));
    }
}
