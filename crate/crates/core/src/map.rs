//! Graph self-maps sending vertices to vertices and edges to edge paths.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    check_concatenable, reduce_steps, DirEdge, EdgeId, EdgePath, Graph, UnionFind, VertexId,
};

/// A map `φ: V → V`. The image of an edge is read along the edge's
/// preferred orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMap {
    graph: Graph,
    vertex_image: Vec<VertexId>,
    edge_image: Vec<Vec<DirEdge>>,
    basepoint: VertexId,
}

/// The derivative of `φ`: each direction goes to the first direction of
/// its image path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionMap {
    image: Vec<DirEdge>,
}

impl DirectionMap {
    pub fn apply(&self, d: DirEdge) -> DirEdge {
        self.image[dir_index(d)]
    }
}

fn dir_index(d: DirEdge) -> usize {
    2 * d.edge.0 + usize::from(!d.forward)
}

/// Where the turn-orbit check found a degenerate turn: the turn between
/// steps `index` and `index + 1` of `φ(edge)` becomes a backtrack in
/// `φ^iterate(edge)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTrackWitness {
    pub edge: EdgeId,
    pub index: usize,
    pub iterate: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTrackVerdict {
    pub is_train_track: bool,
    pub witness: Option<TrainTrackWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub collapsed_edges: Vec<String>,
    pub rounds: usize,
    pub map: GraphMap,
}

impl GraphMap {
    /// Assembles a map without checking it; see [`GraphMap::validate`].
    pub fn new(
        graph: Graph,
        vertex_image: Vec<VertexId>,
        edge_image: Vec<Vec<DirEdge>>,
        basepoint: VertexId,
    ) -> Self {
        GraphMap {
            graph,
            vertex_image,
            edge_image,
            basepoint,
        }
    }

    /// Builds a map on a rose (single vertex `v`) from `(edge, image)` text
    /// pairs, e.g. `[("a", "b"), ("b", "b a")]`.
    pub fn rose(images: &[(&str, &str)]) -> Result<Self> {
        let names: Vec<&str> = images.iter().map(|(e, _)| *e).collect();
        let graph = Graph::rose(&names);
        let edge_image = images
            .iter()
            .map(|(_, img)| graph.steps(img))
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphMap::new(graph, vec![VertexId(0)], edge_image, VertexId(0)))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn basepoint(&self) -> VertexId {
        self.basepoint
    }

    pub fn vertex_image(&self, v: VertexId) -> VertexId {
        self.vertex_image[v.0]
    }

    pub fn edge_image(&self, e: EdgeId) -> &[DirEdge] {
        &self.edge_image[e.0]
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Lists every violated invariant; empty iff the map is valid.
    pub fn validate(&self) -> Vec<String> {
        let g = &self.graph;
        let mut out = Vec::new();
        if !g.is_connected() {
            out.push("graph is not connected".to_string());
        }
        if self.vertex_image.len() != g.vertex_count() {
            out.push(format!(
                "vertex image has {} entries for {} vertices",
                self.vertex_image.len(),
                g.vertex_count()
            ));
            return out;
        }
        if self.edge_image.len() != g.edge_count() {
            out.push(format!(
                "edge image has {} entries for {} edges",
                self.edge_image.len(),
                g.edge_count()
            ));
            return out;
        }
        if let Some(bad) = self.vertex_image.iter().find(|v| v.0 >= g.vertex_count()) {
            out.push(format!("vertex image out of range: {}", bad.0));
            return out;
        }
        if self.basepoint.0 >= g.vertex_count() {
            out.push("basepoint out of range".to_string());
        } else if self.vertex_image[self.basepoint.0] != self.basepoint {
            out.push(format!(
                "basepoint not fixed: {}",
                g.vertex_name(self.basepoint)
            ));
        }
        for e in g.edges() {
            let name = g.edge_name(e);
            let img = &self.edge_image[e.0];
            if img.is_empty() {
                out.push(format!("empty image: {name}"));
                continue;
            }
            if img.iter().any(|d| d.edge.0 >= g.edge_count()) {
                out.push(format!("image of {name} uses an unknown edge"));
                continue;
            }
            let info = g.edge(e);
            let want_start = self.vertex_image[info.init.0];
            let want_end = self.vertex_image[info.term.0];
            if g.init(img[0]) != want_start {
                out.push(format!("endpoint mismatch: {name} (initial)"));
            }
            if let Err(Error::NotConcatenable { index }) =
                check_concatenable(g, g.init(img[0]), img)
            {
                out.push(format!("not concatenable: {name} at step {index}"));
                continue;
            }
            if g.term(*img.last().unwrap()) != want_end {
                out.push(format!("endpoint mismatch: {name} (terminal)"));
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidMap(v))
        }
    }

    /// Image of a direction as a step list (reversed image for reversed edges).
    pub fn image_of_step(&self, d: DirEdge) -> Vec<DirEdge> {
        let img = &self.edge_image[d.edge.0];
        if d.forward {
            img.clone()
        } else {
            img.iter().rev().map(|s| s.reverse()).collect()
        }
    }

    /// Substitutes edge images into a step list without reducing.
    pub fn apply_steps(&self, steps: &[DirEdge]) -> Vec<DirEdge> {
        let mut out = Vec::new();
        for &d in steps {
            let img = &self.edge_image[d.edge.0];
            if d.forward {
                out.extend_from_slice(img);
            } else {
                out.extend(img.iter().rev().map(|s| s.reverse()));
            }
        }
        out
    }

    /// Image of a path; the empty path maps to the empty path at the image
    /// of its vertex.
    pub fn apply_path(&self, p: &EdgePath) -> EdgePath {
        EdgePath::from_parts_unchecked(self.vertex_image(p.start()), self.apply_steps(p.steps()))
    }

    /// The combinatorial path `φ^n(e)`, freely reduced after every
    /// substitution when `tighten` is set.
    pub fn iterate_edge(&self, e: EdgeId, n: usize, tighten: bool) -> EdgePath {
        let mut path = EdgePath::edge(&self.graph, DirEdge::fwd(e));
        for _ in 0..n {
            path = self.apply_path(&path);
            if tighten {
                path = path.tighten();
            }
        }
        path
    }

    pub fn iterate_vertex(&self, v: VertexId, n: usize) -> VertexId {
        (0..n).fold(v, |v, _| self.vertex_image(v))
    }

    pub fn direction_map(&self) -> DirectionMap {
        let mut image = vec![DirEdge::fwd(EdgeId(0)); 2 * self.edge_count()];
        for e in self.graph.edges() {
            let img = &self.edge_image[e.0];
            if let (Some(&first), Some(&last)) = (img.first(), img.last()) {
                image[dir_index(DirEdge::fwd(e))] = first;
                image[dir_index(DirEdge::rev(e))] = last.reverse();
            }
        }
        DirectionMap { image }
    }

    /// Decides the train track property with the turn-orbit procedure: every
    /// `φ(e)` must be immersed and no turn it takes may reach a degenerate
    /// turn under the direction map.
    pub fn is_train_track(&self) -> Result<TrainTrackVerdict> {
        self.ensure_valid()?;
        for e in self.graph.edges() {
            let img = &self.edge_image[e.0];
            if let Some(k) = img.windows(2).position(|w| w[1] == w[0].reverse()) {
                return Ok(TrainTrackVerdict {
                    is_train_track: false,
                    witness: Some(TrainTrackWitness {
                        edge: e,
                        index: k,
                        iterate: 1,
                    }),
                });
            }
        }
        let dm = self.direction_map();
        for e in self.graph.edges() {
            let img = &self.edge_image[e.0];
            for (k, w) in img.windows(2).enumerate() {
                let mut turn = (w[0].reverse(), w[1]);
                let mut seen = HashSet::new();
                let mut j = 0;
                loop {
                    if turn.0 == turn.1 {
                        return Ok(TrainTrackVerdict {
                            is_train_track: false,
                            witness: Some(TrainTrackWitness {
                                edge: e,
                                index: k,
                                iterate: j + 1,
                            }),
                        });
                    }
                    let key = if turn.0 <= turn.1 {
                        turn
                    } else {
                        (turn.1, turn.0)
                    };
                    if !seen.insert(key) {
                        break;
                    }
                    turn = (dm.apply(turn.0), dm.apply(turn.1));
                    j += 1;
                }
            }
        }
        Ok(TrainTrackVerdict {
            is_train_track: true,
            witness: None,
        })
    }

    /// `counts[i][j]` = number of times `φ(e_i)` traverses `e_j`, ignoring
    /// orientation.
    pub fn transition_counts(&self) -> Vec<Vec<u64>> {
        let n = self.edge_count();
        let mut m = vec![vec![0u64; n]; n];
        for (i, img) in self.edge_image.iter().enumerate() {
            for d in img {
                m[i][d.edge.0] += 1;
            }
        }
        m
    }

    /// Strong connectivity of the transition digraph.
    pub fn is_irreducible(&self) -> Result<bool> {
        self.ensure_valid()?;
        Ok(strongly_connected(&self.transition_counts()))
    }

    /// `true` for each edge `e` with `φ^k(e) ≠ e` for all `k > 0`.
    pub fn expanding_edges(&self) -> Result<Vec<bool>> {
        self.ensure_valid()?;
        Ok(self.expanding_unchecked())
    }

    fn expanding_unchecked(&self) -> Vec<bool> {
        let n = self.edge_count();
        // functional graph on single-image edges
        let next: Vec<Option<usize>> = self
            .edge_image
            .iter()
            .map(|img| (img.len() == 1).then(|| img[0].edge.0))
            .collect();
        (0..n)
            .map(|e| {
                let mut cur = e;
                for _ in 0..n {
                    match next[cur] {
                        Some(f) if f == e => return false,
                        Some(f) => cur = f,
                        None => return true,
                    }
                }
                true
            })
            .collect()
    }

    /// Edges whose iterated image lengths stay bounded. Path counts from `e`
    /// in the transition digraph are bounded iff no reachable edge that lies
    /// on a cycle has image length other than one.
    pub fn bounded_edges(&self) -> Vec<bool> {
        let m = self.transition_counts();
        let n = m.len();
        let reach = reachability(&m);
        let on_cycle: Vec<bool> = (0..n).map(|i| reach[i][i]).collect();
        let row_sum: Vec<u64> = m.iter().map(|r| r.iter().sum()).collect();
        let grows = |f: usize| on_cycle[f] && row_sum[f] != 1;
        (0..n)
            .map(|e| !(grows(e) || (0..n).any(|f| reach[e][f] && grows(f))))
            .collect()
    }

    /// Repeatedly collapses the invariant forest of bounded edges until
    /// every remaining edge is expanding with a nonempty image.
    pub fn collapse_invariant_forest(&self) -> Result<CollapseReport> {
        self.ensure_valid()?;
        let mut current = self.clone();
        let mut collapsed = Vec::new();
        let mut rounds = 0;
        loop {
            let bounded = current.bounded_edges();
            if !bounded.iter().any(|&b| b) {
                break;
            }
            let (next, names) = current.collapse_edges(&bounded)?;
            collapsed.extend(names);
            current = next;
            rounds += 1;
        }
        Ok(CollapseReport {
            collapsed_edges: collapsed,
            rounds,
            map: current,
        })
    }

    fn collapse_edges(&self, collapse: &[bool]) -> Result<(GraphMap, Vec<String>)> {
        let g = &self.graph;
        let mut uf = UnionFind::new(g.vertex_count());
        let mut names = Vec::new();
        for e in g.edges().filter(|e| collapse[e.0]) {
            let info = g.edge(e);
            if !uf.union(info.init.0, info.term.0) {
                return Err(Error::ForestHasCycle {
                    edge: info.name.clone(),
                });
            }
            names.push(info.name.clone());
        }
        // one new vertex per component; the basepoint names its component
        let mut comp_of = vec![usize::MAX; g.vertex_count()];
        let mut new_names: Vec<String> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        let base_root = uf.find(self.basepoint.0);
        for v in g.vertices() {
            let r = uf.find(v.0);
            let idx = match roots.iter().position(|&x| x == r) {
                Some(i) => i,
                None => {
                    roots.push(r);
                    let name = if r == base_root {
                        g.vertex_name(self.basepoint).to_string()
                    } else {
                        g.vertex_name(v).to_string()
                    };
                    new_names.push(name);
                    roots.len() - 1
                }
            };
            comp_of[v.0] = idx;
        }
        let mut new_edge_id = vec![usize::MAX; g.edge_count()];
        let mut triples = Vec::new();
        for e in g.edges().filter(|e| !collapse[e.0]) {
            new_edge_id[e.0] = triples.len();
            let info = g.edge(e);
            triples.push((
                info.name.clone(),
                new_names[comp_of[info.init.0]].clone(),
                new_names[comp_of[info.term.0]].clone(),
            ));
        }
        let graph = Graph::new(&new_names, &triples)?;
        let mut vertex_image = vec![VertexId(0); new_names.len()];
        for v in g.vertices() {
            vertex_image[comp_of[v.0]] = VertexId(comp_of[self.vertex_image(v).0]);
        }
        let edge_image = g
            .edges()
            .filter(|e| !collapse[e.0])
            .map(|e| {
                let kept: Vec<DirEdge> = self.edge_image[e.0]
                    .iter()
                    .filter(|d| !collapse[d.edge.0])
                    .map(|d| DirEdge {
                        edge: EdgeId(new_edge_id[d.edge.0]),
                        forward: d.forward,
                    })
                    .collect();
                reduce_steps(&kept)
            })
            .collect();
        let basepoint = VertexId(comp_of[self.basepoint.0]);
        Ok((
            GraphMap::new(graph, vertex_image, edge_image, basepoint),
            names,
        ))
    }
}

/// `reach[i][j]`: there is a walk of length at least one from `i` to `j`
/// along positive entries.
pub fn reachability(m: &[Vec<u64>]) -> Vec<Vec<bool>> {
    let n = m.len();
    let mut reach = vec![vec![false; n]; n];
    for s in 0..n {
        let mut stack: Vec<usize> = (0..n).filter(|&j| m[s][j] > 0).collect();
        while let Some(v) = stack.pop() {
            if reach[s][v] {
                continue;
            }
            reach[s][v] = true;
            stack.extend((0..n).filter(|&j| m[v][j] > 0 && !reach[s][j]));
        }
    }
    reach
}

/// Strong connectivity of the digraph of positive entries. A 1×1 matrix is
/// irreducible by convention.
pub fn strongly_connected(m: &[Vec<u64>]) -> bool {
    let n = m.len();
    if n <= 1 {
        return n == 1;
    }
    let reach = reachability(m);
    (0..n).all(|i| (0..n).all(|j| reach[i][j]))
}
