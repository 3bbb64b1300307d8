//! Finite wallspaces and their dual cube complexes.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::map::GraphMap;
use crate::rational::{self, merge_intervals, Interval, Rat};

pub const DEFAULT_SIZE_CAP: usize = 1_000_000;
pub const DEFAULT_MEDIAN_CAP: usize = 500;

/// A finite set of chambers together with bipartitions of it.
///
/// Chambers are kept sorted by name and every wall is oriented so that the
/// first chamber lies on side `false`; the dual complex therefore does not
/// depend on the order in which chambers were listed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wallspace {
    chambers: Vec<String>,
    /// `sides[w][c]` is the side of wall `w` containing chamber `c`.
    sides: Vec<Vec<bool>>,
}

/// JSON shape: `{"chambers": [...], "walls": [[[...], [...]], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallspaceSpec {
    pub chambers: Vec<String>,
    pub walls: Vec<(Vec<String>, Vec<String>)>,
}

impl Wallspace {
    pub fn new(spec: &WallspaceSpec) -> Result<Self> {
        if spec.chambers.is_empty() {
            return Err(Error::InvalidWallspace("no chambers".into()));
        }
        let mut chambers = spec.chambers.clone();
        chambers.sort();
        if let Some(w) = chambers.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidWallspace(format!("duplicate chamber `{}`", w[0])));
        }
        let index: HashMap<&str, usize> = chambers.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let lookup = |name: &String| {
            index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidWallspace(format!("unknown chamber `{name}`")))
        };
        let mut sides = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, (a, b)) in spec.walls.iter().enumerate() {
            let mut side: Vec<Option<bool>> = vec![None; chambers.len()];
            for (names, s) in [(a, false), (b, true)] {
                if names.is_empty() {
                    return Err(Error::InvalidWallspace(format!("wall {k} has an empty halfspace")));
                }
                for n in names {
                    let c = lookup(n)?;
                    if side[c].is_some() {
                        return Err(Error::InvalidWallspace(format!(
                            "wall {k} puts `{n}` in both halfspaces or twice"
                        )));
                    }
                    side[c] = Some(s);
                }
            }
            let mut side: Vec<bool> = side
                .into_iter()
                .enumerate()
                .map(|(c, s)| {
                    s.ok_or_else(|| {
                        Error::InvalidWallspace(format!("wall {k} misses chamber `{}`", chambers[c]))
                    })
                })
                .collect::<Result<_>>()?;
            if side[0] {
                side.iter_mut().for_each(|s| *s = !*s);
            }
            if !seen.insert(side.clone()) {
                return Err(Error::InvalidWallspace(format!("wall {k} is a duplicate")));
            }
            sides.push(side);
        }
        Ok(Wallspace { chambers, sides })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: WallspaceSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidWallspace(e.to_string()))?;
        Wallspace::new(&spec)
    }

    pub fn to_spec(&self) -> WallspaceSpec {
        let part = |w: &Vec<bool>, s: bool| {
            self.chambers
                .iter()
                .zip(w)
                .filter(|(_, &x)| x == s)
                .map(|(c, _)| c.clone())
                .collect()
        };
        WallspaceSpec {
            chambers: self.chambers.clone(),
            walls: self.sides.iter().map(|w| (part(w, false), part(w, true))).collect(),
        }
    }

    pub fn chambers(&self) -> &[String] {
        &self.chambers
    }

    pub fn wall_count(&self) -> usize {
        self.sides.len()
    }

    pub fn chamber_index(&self, name: &str) -> Result<usize> {
        self.chambers
            .binary_search_by(|c| c.as_str().cmp(name))
            .map_err(|_| Error::InvalidWallspace(format!("unknown chamber `{name}`")))
    }

    /// `quadrants(v, w)[a][b]`: some chamber lies on side `a` of `v` and `b` of `w`.
    fn quadrants(&self) -> Vec<Vec<[[bool; 2]; 2]>> {
        let k = self.sides.len();
        let mut q = vec![vec![[[false; 2]; 2]; k]; k];
        for (v, qv) in q.iter_mut().enumerate() {
            for (w, qvw) in qv.iter_mut().enumerate() {
                for c in 0..self.chambers.len() {
                    qvw[usize::from(self.sides[v][c])][usize::from(self.sides[w][c])] = true;
                }
            }
        }
        q
    }
}

/// One halfspace per wall, `true` meaning the side not containing the
/// first chamber.
pub type Ultrafilter = Vec<bool>;

pub fn principal_ultrafilter(ws: &Wallspace, chamber: &str) -> Result<Ultrafilter> {
    let c = ws.chamber_index(chamber)?;
    Ok(ws.sides.iter().map(|w| w[c]).collect())
}

/// Every two chosen halfspaces share a chamber.
pub fn is_consistent(ws: &Wallspace, u: &[bool]) -> bool {
    let q = ws.quadrants();
    (0..u.len()).all(|v| (v + 1..u.len()).all(|w| q[v][w][usize::from(u[v])][usize::from(u[w])]))
}

/// Pairs of walls all four of whose quadrants are occupied.
pub fn crossing_pairs(ws: &Wallspace) -> Vec<(usize, usize)> {
    let q = ws.quadrants();
    let k = ws.wall_count();
    (0..k)
        .flat_map(|v| (v + 1..k).map(move |w| (v, w)))
        .filter(|&(v, w)| q[v][w].iter().flatten().all(|&x| x))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSkeleton {
    pub vertices: Vec<Ultrafilter>,
    /// `(u, v, wall)` with `u < v`.
    pub edges: Vec<(usize, usize, usize)>,
    /// Number of cubes of each dimension, starting with vertices.
    pub cube_counts: Vec<usize>,
    pub dimension: usize,
    /// Vertex of each chamber's principal ultrafilter.
    pub principal: Vec<usize>,
}

/// The cube complex dual to a wallspace, found by flipping one wall at a
/// time from the principal ultrafilters.
pub fn dual_complex(ws: &Wallspace, max_dim: usize, size_cap: usize) -> Result<CubeSkeleton> {
    let q = ws.quadrants();
    let k = ws.wall_count();
    let flippable = |u: &[bool], w: usize| {
        let s = usize::from(!u[w]);
        (0..k).all(|v| v == w || q[w][v][s][usize::from(u[v])])
    };
    let mut found: BTreeSet<Ultrafilter> = BTreeSet::new();
    let mut queue = VecDeque::new();
    for c in 0..ws.chambers.len() {
        let u: Ultrafilter = ws.sides.iter().map(|w| w[c]).collect();
        if found.insert(u.clone()) {
            queue.push_back(u);
        }
    }
    if found.len() > size_cap {
        return Err(Error::SizeCap { cap: size_cap });
    }
    while let Some(u) = queue.pop_front() {
        for w in 0..k {
            if flippable(&u, w) {
                let mut v = u.clone();
                v[w] = !v[w];
                if found.insert(v.clone()) {
                    if found.len() > size_cap {
                        return Err(Error::SizeCap { cap: size_cap });
                    }
                    queue.push_back(v);
                }
            }
        }
    }
    let vertices: Vec<Ultrafilter> = found.into_iter().collect();
    let index: HashMap<&[bool], usize> = vertices.iter().enumerate().map(|(i, u)| (u.as_slice(), i)).collect();
    let flip = |u: &[bool], w: usize| -> Option<usize> {
        let mut v = u.to_vec();
        v[w] = !v[w];
        index.get(v.as_slice()).copied()
    };
    let mut edges = Vec::new();
    let mut counts = vec![vertices.len()];
    for (i, u) in vertices.iter().enumerate() {
        // cubes are counted at their corner with every cube wall unflipped
        let up: Vec<usize> = (0..k).filter(|&w| !u[w] && flip(u, w).is_some()).collect();
        for &w in &up {
            edges.push((i, flip(u, w).expect("checked"), w));
        }
        let mut stack: Vec<(Vec<usize>, usize, Vec<Ultrafilter>)> = vec![(Vec::new(), 0, vec![u.clone()])];
        while let Some((walls, next, corners)) = stack.pop() {
            if !walls.is_empty() {
                if counts.len() <= walls.len() {
                    counts.resize(walls.len() + 1, 0);
                }
                counts[walls.len()] += 1;
            }
            if walls.len() == max_dim {
                continue;
            }
            for (j, &w) in up.iter().enumerate().skip(next) {
                let grown: Option<Vec<Ultrafilter>> = corners
                    .iter()
                    .map(|c| {
                        flip(c, w).map(|_| {
                            let mut d = c.clone();
                            d[w] = !d[w];
                            d
                        })
                    })
                    .collect();
                if let Some(mut more) = grown {
                    let mut ws2 = walls.clone();
                    ws2.push(w);
                    let mut all = corners.clone();
                    all.append(&mut more);
                    stack.push((ws2, j + 1, all));
                }
            }
        }
    }
    edges.sort();
    let principal = (0..ws.chambers.len())
        .map(|c| {
            let u: Ultrafilter = ws.sides.iter().map(|w| w[c]).collect();
            index[u.as_slice()]
        })
        .collect();
    let dimension = counts.iter().rposition(|&n| n > 0).unwrap_or(0);
    Ok(CubeSkeleton {
        vertices,
        edges,
        cube_counts: counts,
        dimension,
        principal,
    })
}

impl CubeSkeleton {
    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let adj = adjacency(n, self.edges.iter().map(|e| (e.0, e.1)));
        n == 0 || bfs(&adj, 0).iter().all(|d| d.is_some())
    }

    pub fn is_median(&self, cap: usize) -> Result<MedianVerdict> {
        is_median_graph(self.vertices.len(), &self.edges.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(), cap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedianVerdict {
    pub is_median: bool,
    /// A triple without a unique median.
    pub witness: Option<(usize, usize, usize)>,
}

fn adjacency(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; adj.len()];
    d[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if d[y].is_none() {
                d[y] = Some(d[x].expect("visited") + 1);
                queue.push_back(y);
            }
        }
    }
    d
}

/// Checks that every triple of vertices has exactly one median, using
/// bitsets for geodesic intervals.
pub fn is_median_graph(n: usize, edges: &[(usize, usize)], cap: usize) -> Result<MedianVerdict> {
    if n > cap {
        return Err(Error::SizeCap { cap });
    }
    let adj = adjacency(n, edges.iter().copied());
    let mut dist = Vec::with_capacity(n);
    for s in 0..n {
        let d = bfs(&adj, s);
        if d.iter().any(Option::is_none) {
            return Ok(MedianVerdict {
                is_median: false,
                witness: Some((s, d.iter().position(Option::is_none).expect("found"), s)),
            });
        }
        dist.push(d.into_iter().map(|x| x.expect("connected")).collect::<Vec<_>>());
    }
    let words = n.div_ceil(64);
    let interval = |x: usize, y: usize| -> Vec<u64> {
        let mut bits = vec![0u64; words];
        for m in 0..n {
            if dist[x][m] + dist[m][y] == dist[x][y] {
                bits[m / 64] |= 1 << (m % 64);
            }
        }
        bits
    };
    let intervals: Vec<Vec<Vec<u64>>> = (0..n).map(|x| (0..n).map(|y| interval(x, y)).collect()).collect();
    for x in 0..n {
        for y in x..n {
            for z in y..n {
                let count: u32 = (0..words)
                    .map(|i| (intervals[x][y][i] & intervals[y][z][i] & intervals[x][z][i]).count_ones())
                    .sum();
                if count != 1 {
                    return Ok(MedianVerdict {
                        is_median: false,
                        witness: Some((x, y, z)),
                    });
                }
            }
        }
    }
    Ok(MedianVerdict {
        is_median: true,
        witness: None,
    })
}

/// Heuristic wallspace built from wall footprints: chambers are the
/// midpoints of `samples` equal parts of every edge, and each footprint
/// separates the samples inside it from those outside. Footprints that
/// separate nothing or repeat an earlier one are skipped.
pub fn footprint_wallspace(
    map: &GraphMap,
    footprints: &[Vec<(EdgeId, Interval)>],
    samples: usize,
) -> Result<Wallspace> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample per edge".into()));
    }
    let g = map.graph();
    let mut points = Vec::new();
    for e in g.edges() {
        for k in 0..samples {
            let pos = Rat::new((2 * k + 1).into(), (2 * samples).into());
            points.push((e, pos));
        }
    }
    let names: Vec<String> = points
        .iter()
        .map(|(e, pos)| format!("{}({})", g.edge_name(*e), rational::fmt_rat(pos)))
        .collect();
    let mut walls = Vec::new();
    let mut seen = BTreeSet::new();
    for fp in footprints {
        let mut by_edge: HashMap<EdgeId, Vec<Interval>> = HashMap::new();
        for (e, iv) in fp {
            by_edge.entry(*e).or_default().push(iv.clone());
        }
        let by_edge: HashMap<EdgeId, Vec<Interval>> =
            by_edge.into_iter().map(|(e, v)| (e, merge_intervals(v))).collect();
        let inside: Vec<bool> = points
            .iter()
            .map(|(e, pos)| by_edge.get(e).is_some_and(|v| v.iter().any(|iv| iv.contains(pos))))
            .collect();
        if inside.iter().all(|&x| x) || inside.iter().all(|&x| !x) {
            continue;
        }
        let key: Vec<bool> = inside.iter().map(|&x| x != inside[0]).collect();
        if !seen.insert(key) {
            continue;
        }
        let part = |s: bool| {
            names
                .iter()
                .zip(&inside)
                .filter(|(_, &x)| x == s)
                .map(|(n, _)| n.clone())
                .collect::<Vec<_>>()
        };
        walls.push((part(false), part(true)));
    }
    Wallspace::new(&WallspaceSpec {
        chambers: names,
        walls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(chambers: &[&str], walls: &[(&[&str], &[&str])]) -> WallspaceSpec {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        WallspaceSpec {
            chambers: s(chambers),
            walls: walls.iter().map(|(a, b)| (s(a), s(b))).collect(),
        }
    }

    /// `k` pairwise crossing walls on the `2^k` sign vectors.
    pub(crate) fn cube(k: usize) -> Wallspace {
        let chambers: Vec<String> = (0..1usize << k).map(|m| format!("{m:0k$b}")).collect();
        let walls = (0..k)
            .map(|w| {
                let side = |s: char| {
                    chambers
                        .iter()
                        .filter(|c| c.as_bytes()[w] as char == s)
                        .cloned()
                        .collect::<Vec<_>>()
                };
                (side('0'), side('1'))
            })
            .collect();
        Wallspace::new(&WallspaceSpec { chambers, walls }).unwrap()
    }

    fn line(n: usize) -> Wallspace {
        let chambers: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let walls = (1..n)
            .map(|k| (chambers[..k].to_vec(), chambers[k..].to_vec()))
            .collect();
        Wallspace::new(&WallspaceSpec { chambers, walls }).unwrap()
    }

    #[test]
    fn principal_ultrafilters() {
        let ws = Wallspace::new(&spec(&["p", "q"], &[(&["q"], &["p"])])).unwrap();
        let up = principal_ultrafilter(&ws, "p").unwrap();
        let uq = principal_ultrafilter(&ws, "q").unwrap();
        assert_ne!(up, uq);
        assert!(is_consistent(&ws, &up));
        let empty = Wallspace::new(&spec(&["p"], &[])).unwrap();
        assert!(principal_ultrafilter(&empty, "p").unwrap().is_empty());
        assert!(principal_ultrafilter(&empty, "x").is_err());
        let c = cube(3);
        assert_eq!(principal_ultrafilter(&c, "101").unwrap(), vec![true, false, true]);
    }

    #[test]
    fn invalid_wallspaces() {
        assert!(Wallspace::new(&spec(&["p", "q"], &[(&["p"], &[])])).is_err());
        assert!(Wallspace::new(&spec(&["p", "q"], &[(&["p"], &["p", "q"])])).is_err());
        assert!(Wallspace::new(&spec(&["p", "q", "r"], &[(&["p"], &["q"])])).is_err());
        assert!(Wallspace::new(&spec(&["p", "q"], &[(&["p"], &["q"]), (&["q"], &["p"])])).is_err());
        assert!(Wallspace::new(&spec(&["p", "p"], &[])).is_err());
    }

    #[test]
    fn one_wall() {
        let ws = Wallspace::new(&spec(&["p", "q"], &[(&["p"], &["q"])])).unwrap();
        let sk = dual_complex(&ws, 8, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(sk.cube_counts, vec![2, 1]);
    }

    #[test]
    fn three_crossing_walls() {
        let sk = dual_complex(&cube(3), 8, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(sk.cube_counts, vec![8, 12, 6, 1]);
        assert_eq!(sk.dimension, 3);
        assert!(sk.is_connected());
        assert!(sk.is_median(DEFAULT_MEDIAN_CAP).unwrap().is_median);
    }

    #[test]
    fn cube_counts_follow_the_formula() {
        for k in 1..=5 {
            let sk = dual_complex(&cube(k), k, DEFAULT_SIZE_CAP).unwrap();
            assert_eq!(sk.vertices.len(), 1 << k);
            assert_eq!(sk.edges.len(), k << (k - 1));
        }
    }

    #[test]
    fn nested_walls_give_a_path() {
        let sk = dual_complex(&line(4), 8, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(sk.cube_counts, vec![4, 3]);
        assert!(sk.is_median(DEFAULT_MEDIAN_CAP).unwrap().is_median);
    }

    #[test]
    fn dimension_cap_truncates_counts() {
        let sk = dual_complex(&cube(3), 1, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(sk.cube_counts, vec![8, 12]);
    }

    #[test]
    fn size_cap() {
        assert_eq!(dual_complex(&cube(4), 4, 10), Err(Error::SizeCap { cap: 10 }));
    }

    #[test]
    fn crossing() {
        assert_eq!(crossing_pairs(&cube(2)), vec![(0, 1)]);
        assert!(crossing_pairs(&line(3)).is_empty());
    }

    #[test]
    fn non_principal_vertices_are_found() {
        // three walls pairwise crossing but with only four chambers
        let ws = Wallspace::new(&spec(
            &["000", "011", "101", "110"],
            &[
                (&["000", "011"], &["101", "110"]),
                (&["000", "101"], &["011", "110"]),
                (&["000", "110"], &["011", "101"]),
            ],
        ))
        .unwrap();
        let sk = dual_complex(&ws, 3, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(sk.vertices.len(), 8);
        assert_eq!(sk.cube_counts[3], 1);
    }

    #[test]
    fn chamber_order_does_not_matter() {
        let a = Wallspace::new(&spec(&["x", "y", "z"], &[(&["x"], &["y", "z"]), (&["z"], &["x", "y"])])).unwrap();
        let b = Wallspace::new(&spec(&["z", "y", "x"], &[(&["y", "z"], &["x"]), (&["x", "y"], &["z"])])).unwrap();
        assert_eq!(
            dual_complex(&a, 3, DEFAULT_SIZE_CAP).unwrap(),
            dual_complex(&b, 3, DEFAULT_SIZE_CAP).unwrap()
        );
    }

    #[test]
    fn five_cycle_is_not_median() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        let v = is_median_graph(5, &edges, DEFAULT_MEDIAN_CAP).unwrap();
        assert!(!v.is_median);
        assert!(v.witness.is_some());
        assert!(is_median_graph(600, &[], DEFAULT_MEDIAN_CAP).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"chambers": ["p", "q", "r"], "walls": [[["p"], ["q", "r"]]]}"#;
        let ws = Wallspace::from_json(text).unwrap();
        assert_eq!(Wallspace::new(&ws.to_spec()).unwrap(), ws);
    }

    #[test]
    fn footprints_make_walls() {
        let m = crate::examples::golden();
        let half = |e: usize| vec![(EdgeId(e), Interval::new(rational::zero(), crate::rational::rat(1, 2)))];
        let ws = footprint_wallspace(&m, &[half(0), half(1), half(0)], 4).unwrap();
        assert_eq!(ws.chambers().len(), 8);
        assert_eq!(ws.wall_count(), 2);
    }
}
