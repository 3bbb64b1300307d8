//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stdout so the lines survive output capture.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use fbcube_core::analysis::analyze;
use fbcube_core::cubulation::{dual_complex, is_consistent, Wallspace, WallspaceSpec, DEFAULT_MEDIAN_CAP, DEFAULT_SIZE_CAP};
use fbcube_core::dynamics::{image_point, is_singular, level, periodic_points, pl_restriction};
use fbcube_core::examples::{golden, golden_with_bridge, tribonacci};
use fbcube_core::leafspace::{scaled_distance, AnchoredPath, MetricMap, MetricPoint};
use fbcube_core::perron::{perron_eigen, verify_expansion, TransitionMatrix, DEFAULT_TOL};
use fbcube_core::rational::{one, rat, zero};
use fbcube_core::torus::{build_torus, presentation};
use fbcube_core::walls::{
    self, approximate_wall, build_wall, check_busts, check_wall, choose_busts, cubulation_constants,
    narrow_zone_bound, secondary_busts,
};
use fbcube_core::{EdgeId, EdgePoint, Graph, GraphMap, Point, Rat, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EIGENVALUE_TOL: f64 = 1e-9;
const EXPANSION_POWERS: usize = 8;
const EXPANSION_TOL: f64 = 1e-8;
const LEVEL_POINTS: usize = 100;
const LEVEL_MAX_DEPTH: usize = 5;
const METRIC_PAIRS: usize = 50;
const METRIC_DEPTH: usize = 12;
const MONOTONE_TOL: f64 = 1e-9;
const ENDPOINT_TOL: f64 = 1e-8;
const RUNTIME_LIMIT: Duration = Duration::from_secs(1);

/// Override with `FBCUBE_SEED=<u64>`.
fn seed() -> u64 {
    std::env::var("FBCUBE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0x5eed_2026)
}

fn criterion(n: u32, title: &str, body: impl FnOnce() -> Result<(), String>) {
    let outcome = body();
    let line = match &outcome {
        Ok(()) => format!("PASS criterion {n:>2}: {title}\n"),
        Err(why) => format!("FAIL criterion {n:>2}: {title}: {why}\n"),
    };
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

/// Root of a polynomial with a single sign change on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(lo) < 0.0) == (f(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_edge_point(rng: &mut ChaCha8Rng, g: &Graph) -> EdgePoint {
    let edge = EdgeId(rng.gen_range(0..g.edge_count()));
    let q: i64 = rng.gen_range(2..=1000);
    let p: i64 = rng.gen_range(1..q);
    EdgePoint { edge, pos: rat(p, q) }
}

/// Positive images on a rose: no cancellation ever, hence train track.
fn random_positive_map(rng: &mut ChaCha8Rng) -> GraphMap {
    loop {
        let n = rng.gen_range(2..=3);
        let names: Vec<String> = (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
        let g = Graph::rose(&names);
        let images = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=3);
                (0..len)
                    .map(|_| fbcube_core::DirEdge::fwd(EdgeId(rng.gen_range(0..n))))
                    .collect()
            })
            .collect();
        let m = GraphMap::new(g, vec![VertexId(0)], images, VertexId(0));
        if m.validate().is_empty()
            && m.is_irreducible().unwrap()
            && m.expanding_edges().unwrap().iter().all(|&x| x)
        {
            return m;
        }
    }
}

/// Splits the vertex of a rose into `u` and `w` joined by a fixed bridge
/// `t`, with petals alternating between the two ends.
fn blow_up(rose: &GraphMap) -> GraphMap {
    let rg = rose.graph();
    let n = rg.edge_count();
    let home = |e: usize| if e.is_multiple_of(2) { "u" } else { "w" };
    let mut edges: Vec<(String, String, String)> = (0..n)
        .map(|e| {
            let h = home(e).to_string();
            (rg.edge_name(EdgeId(e)).to_string(), h.clone(), h)
        })
        .collect();
    edges.push(("t".into(), "u".into(), "w".into()));
    let edge_refs: Vec<(&str, &str, &str)> =
        edges.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let g = Graph::new(&["u", "w"], &edge_refs).unwrap();
    let mut images = Vec::new();
    for e in 0..n {
        let mut at = home(e);
        let mut word = Vec::new();
        for d in rose.edge_image(EdgeId(e)) {
            let target = home(d.edge.0);
            if target != at {
                word.push(if at == "u" { "t" } else { "-t" }.to_string());
                at = target;
            }
            word.push(rg.step_name(*d));
        }
        if at != home(e) {
            word.push(if at == "u" { "t" } else { "-t" }.to_string());
        }
        images.push(g.steps(&word.join(" ")).unwrap());
    }
    images.push(g.steps("t").unwrap());
    GraphMap::new(g, vec![VertexId(0), VertexId(1)], images, VertexId(0))
}

#[test]
fn criterion_01_golden_analysis() {
    criterion(1, "golden map analysis", || {
        let start = Instant::now();
        let r = analyze(&golden()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(r.valid, "golden map reported invalid");
        ensure!(r.train_track.as_ref().is_some_and(|t| t.is_train_track), "not train track");
        ensure!(r.irreducible == Some(true), "not irreducible");
        ensure!(r.expanding_edges == Some(vec![true, true]), "expanding = {:?}", r.expanding_edges);
        ensure!(
            r.transition_matrix == Some(vec![vec![0, 1], vec![1, 1]]),
            "matrix = {:?}",
            r.transition_matrix
        );
        let root = bisect(|x| x * x - x - 1.0, 1.0, 2.0);
        let ev = r.eigenvalue.ok_or("no eigenvalue")?;
        ensure!((ev - root).abs() <= EIGENVALUE_TOL, "eigenvalue {ev} vs bisection {root}");
        ensure!((ev - 1.618_033_988_7).abs() <= EIGENVALUE_TOL, "eigenvalue {ev}");
        ensure!(elapsed < RUNTIME_LIMIT, "took {elapsed:?}");
        Ok(())
    });
}

#[test]
fn criterion_02_eigenvector_homothety() {
    criterion(2, "eigenvector homothety", || {
        let tri_root = bisect(|x| x * x * x - x * x - 1.0, 1.0, 2.0);
        for (name, m, root) in [
            ("golden", golden(), bisect(|x| x * x - x - 1.0, 1.0, 2.0)),
            ("tribonacci", tribonacci(), tri_root),
        ] {
            let pd = perron_eigen(&TransitionMatrix::of(&m), DEFAULT_TOL).map_err(|e| e.to_string())?;
            ensure!((pd.eigenvalue - root).abs() <= EIGENVALUE_TOL, "{name}: eigenvalue {}", pd.eigenvalue);
            let x = verify_expansion(&m, &pd, EXPANSION_POWERS, EXPANSION_TOL).map_err(|e| e.to_string())?;
            ensure!(
                x.max_residual <= EXPANSION_TOL,
                "{name}: residual {} at power {}",
                x.max_residual,
                x.worst_power
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_03_periodic_point_exactness() {
    criterion(3, "periodic point exactness", || {
        let m = golden();
        let a = EdgeId(0);
        let pp = periodic_points(&m, a, 3).map_err(|e| e.to_string())?;
        let found: Vec<Rat> = pp.interior.iter().map(|f| f.point.pos.clone()).collect();
        ensure!(found == vec![rat(1, 3)], "found {found:?}");

        let start = Point::Edge(EdgePoint { edge: a, pos: rat(1, 3) });
        let mut p = start.clone();
        for k in 1..=3 {
            p = image_point(&m, &p);
            ensure!((p == start) == (k == 3), "orbit returns at step {k}");
        }

        // every chart piece of φ³ over `a` back onto `a`: a root of
        // f(t) - t exists iff the sign changes across the piece
        let mut oracle = BTreeSet::new();
        for piece in &pl_restriction(&m, a, 3).pieces {
            if piece.target.edge != a {
                continue;
            }
            let g = |t: &Rat| piece.apply(t) - t;
            let (lo, hi) = (g(&piece.domain.lo), g(&piece.domain.hi));
            if lo.clone() * hi.clone() > zero() || (lo == zero() && hi == zero()) {
                continue;
            }
            let t = piece.offset.clone() / (one() - piece.slope.clone());
            if t > zero() && t < one() {
                oracle.insert(t);
            }
        }
        let found: BTreeSet<Rat> = found.into_iter().collect();
        ensure!(oracle == found, "oracle {oracle:?}");
        Ok(())
    });
}

#[test]
fn criterion_04_level_properties() {
    criterion(4, "level properties", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed());
        for (name, m) in [("golden", golden()), ("tribonacci", tribonacci())] {
            let mut tested = 0;
            while tested < LEVEL_POINTS {
                let p = Point::Edge(random_edge_point(&mut rng, m.graph()));
                if is_singular(&m, &p, LEVEL_MAX_DEPTH + 1).singular_within_bound {
                    continue;
                }
                tested += 1;
                let mut longer = level(&m, &p, LEVEL_MAX_DEPTH + 1);
                for l in (0..=LEVEL_MAX_DEPTH).rev() {
                    let lv = level(&m, &p, l);
                    lv.check_tree(&m).map_err(|e| format!("{name} {p:?} L={l}: {e}"))?;
                    for (i, node) in lv.nodes.iter().enumerate() {
                        let ok = match node.parent {
                            None => i == 0 && node.depth == 0,
                            Some(q) => i != 0 && lv.nodes[q].depth + 1 == node.depth,
                        };
                        ensure!(ok, "{name} {p:?} L={l}: bad parent at node {i}");
                    }
                    ensure!(longer.truncate(l) == lv, "{name} {p:?}: truncation differs at L={l}");
                    longer = lv;
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_05_metric_monotonicity() {
    criterion(5, "scaled metric monotonicity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed() ^ 5);
        for (name, m) in [("golden", golden()), ("tribonacci", tribonacci())] {
            let g = m.graph();
            let pd = perron_eigen(&TransitionMatrix::of(&m), DEFAULT_TOL).map_err(|e| e.to_string())?;
            let mm = MetricMap::new(&m, &pd).map_err(|e| e.to_string())?;
            for _ in 0..METRIC_PAIRS {
                let mut pick = || MetricPoint::Edge {
                    edge: EdgeId(rng.gen_range(0..g.edge_count())),
                    pos: rng.gen_range(0.001..0.999),
                };
                let (x, y) = (pick(), pick());
                let path = AnchoredPath::canonical(g, x, y);
                let d: Vec<f64> = (0..=METRIC_DEPTH).map(|n| scaled_distance(&mm, &path, n)).collect();
                for n in 1..d.len() {
                    ensure!(d[n] <= d[n - 1] + MONOTONE_TOL, "{name} {x:?}-{y:?}: d_{n} = {} > {}", d[n], d[n - 1]);
                }
            }
            for e in g.edges() {
                let w = pd.weights.get(e).map_err(|e| e.to_string())?;
                let path = AnchoredPath::within_edge(e, 0.0, 1.0);
                for n in 0..=METRIC_DEPTH {
                    let d = scaled_distance(&mm, &path, n);
                    ensure!((d - w).abs() <= ENDPOINT_TOL, "{name} edge {e:?}: d_{n} = {d}, |e| = {w}");
                }
            }
        }
        Ok(())
    });
}

fn ep(edge: usize, p: i64, q: i64) -> EdgePoint {
    EdgePoint {
        edge: EdgeId(edge),
        pos: rat(p, q),
    }
}

/// Cases shared by the wall criteria.
fn wall_cases() -> Vec<(&'static str, GraphMap, usize, Vec<EdgePoint>)> {
    let mut cases = Vec::new();
    for l in [2, 3, 4] {
        cases.push(("golden", golden(), l, vec![ep(0, 1, 3)]));
        cases.push(("golden", golden(), l, vec![ep(0, 2, 7), ep(1, 3, 5)]));
        cases.push(("tribonacci", tribonacci(), l, vec![ep(0, 1, 3), ep(2, 1, 2)]));
        cases.push(("tribonacci", tribonacci(), l, vec![ep(1, 2, 9)]));
    }
    cases
}

#[test]
fn criterion_06_bust_properties() {
    criterion(6, "bust properties", || {
        for (name, m, l, anchors) in wall_cases() {
            let sys = choose_busts(&m, l, &anchors, None).map_err(|e| format!("{name} L={l}: {e}"))?;
            let report = check_busts(&m, &sys, None);
            ensure!(report.checks.len() == 6, "{name} L={l}: {} checks", report.checks.len());
            ensure!(report.all_passed(), "{name} L={l}:\n{report}");
            let pls: Vec<_> = m.graph().edges().map(|e| pl_restriction(&m, e, l)).collect();
            ensure!(
                secondary_busts(&pls, &sys.busts) == sys.secondary,
                "{name} L={l}: secondary busts differ on re-derivation"
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_07_wall_structure() {
    criterion(7, "wall structure", || {
        for (name, m, l, anchors) in wall_cases() {
            let sys = choose_busts(&m, l, &anchors, None).map_err(|e| format!("{name} L={l}: {e}"))?;
            let wall = build_wall(&m, &sys).map_err(|e| format!("{name} L={l}: {e}"))?;
            let report = check_wall(&m, &wall);
            for check in [
                walls::TUNNELS_DISJOINT,
                walls::OPPOSITE_TUNNELS_MEET_ONCE,
                walls::LEVELS_AVOID_VERTICES,
            ] {
                let c = report.get(check).ok_or(format!("missing check {check}"))?;
                ensure!(c.passed, "{name} L={l}: {check}: {:?}", c.witness);
            }
            ensure!(report.all_passed(), "{name} L={l}:\n{report}");
            approximate_wall(&m, &wall).map_err(|e| format!("{name} L={l}: {e}"))?;
        }
        Ok(())
    });
}

#[test]
fn criterion_08_constants() {
    criterion(8, "closed-form constants", || {
        let c = cubulation_constants(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).map_err(|e| e.to_string())?;
        ensure!((c.kappa1, c.kappa2, c.l0) == (4.0, 60.0, 24.0), "got {c:?}");
        let l = narrow_zone_bound(2.0, 1.0, 0.125).map_err(|e| e.to_string())?;
        ensure!(l == 13, "narrow-zone bound {l}");
        Ok(())
    });
}

/// Counts k-cubes by brute force over all orientations of all walls.
fn enumerate_cubes(ws: &Wallspace) -> Vec<usize> {
    let n = ws.wall_count();
    let consistent: Vec<bool> = (0..1u32 << n)
        .map(|bits| {
            let u: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            is_consistent(ws, &u)
        })
        .collect();
    let mut counts = vec![0usize; n + 1];
    for bits in 0..1u32 << n {
        if !consistent[bits as usize] {
            continue;
        }
        // subsets of walls that are all unflipped at this corner
        for s in 0..1u32 << n {
            if s & bits != 0 {
                continue;
            }
            let mut sub = s;
            let mut all = true;
            loop {
                if !consistent[(bits | sub) as usize] {
                    all = false;
                    break;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            if all {
                counts[s.count_ones() as usize] += 1;
            }
        }
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    counts
}

fn chambers_spec(chambers: &[&str], walls: &[(&[&str], &[&str])]) -> WallspaceSpec {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    WallspaceSpec {
        chambers: s(chambers),
        walls: walls.iter().map(|(a, b)| (s(a), s(b))).collect(),
    }
}

#[test]
fn criterion_09_dual_complex() {
    criterion(9, "dual cube complex", || {
        let start = Instant::now();
        let crossing = chambers_spec(
            &["000", "001", "010", "011", "100", "101", "110", "111"],
            &[
                (&["000", "001", "010", "011"], &["100", "101", "110", "111"]),
                (&["000", "001", "100", "101"], &["010", "011", "110", "111"]),
                (&["000", "010", "100", "110"], &["001", "011", "101", "111"]),
            ],
        );
        let ws = Wallspace::new(&crossing).map_err(|e| e.to_string())?;
        let sk = dual_complex(&ws, 3, DEFAULT_SIZE_CAP).map_err(|e| e.to_string())?;
        ensure!(sk.cube_counts == vec![8, 12, 6, 1], "crossing: {:?}", sk.cube_counts);
        ensure!(sk.cube_counts == enumerate_cubes(&ws), "crossing: enumeration {:?}", enumerate_cubes(&ws));
        let med = sk.is_median(DEFAULT_MEDIAN_CAP).map_err(|e| e.to_string())?;
        ensure!(med.is_median, "crossing: not median at {:?}", med.witness);

        let nested = chambers_spec(
            &["p0", "p1", "p2", "p3"],
            &[
                (&["p0"], &["p1", "p2", "p3"]),
                (&["p0", "p1"], &["p2", "p3"]),
                (&["p0", "p1", "p2"], &["p3"]),
            ],
        );
        let ws = Wallspace::new(&nested).map_err(|e| e.to_string())?;
        let sk = dual_complex(&ws, 3, DEFAULT_SIZE_CAP).map_err(|e| e.to_string())?;
        ensure!(sk.cube_counts == vec![4, 3], "nested: {:?}", sk.cube_counts);
        ensure!(sk.cube_counts == enumerate_cubes(&ws), "nested: enumeration differs");
        let mut degree = vec![0; sk.vertices.len()];
        for (u, v, _) in &sk.edges {
            degree[*u] += 1;
            degree[*v] += 1;
        }
        degree.sort();
        ensure!(sk.is_connected() && degree == vec![1, 1, 2, 2], "nested: not a path {degree:?}");
        let med = sk.is_median(DEFAULT_MEDIAN_CAP).map_err(|e| e.to_string())?;
        ensure!(med.is_median, "nested: not median");
        ensure!(start.elapsed() < RUNTIME_LIMIT, "took {:?}", start.elapsed());
        Ok(())
    });
}

#[test]
fn criterion_10_collapse() {
    criterion(10, "invariant forest collapse", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed() ^ 10);
        let mut cases = vec![(golden(), golden_with_bridge(), "c")];
        for _ in 0..10 {
            let rose = random_positive_map(&mut rng);
            let blown = blow_up(&rose);
            cases.push((rose, blown, "t"));
        }
        for (rose, input, bridge) in cases {
            ensure!(input.validate().is_empty(), "blow-up invalid: {:?}", input.validate());
            let was_tt = input.is_train_track().map_err(|e| e.to_string())?.is_train_track;
            let was_irr = input.is_irreducible().map_err(|e| e.to_string())?;
            let rep = input.collapse_invariant_forest().map_err(|e| e.to_string())?;
            ensure!(rep.rounds == 1, "{} rounds", rep.rounds);
            ensure!(rep.collapsed_edges == vec![bridge.to_string()], "collapsed {:?}", rep.collapsed_edges);
            let out = &rep.map;
            ensure!(out.validate().is_empty(), "result invalid: {:?}", out.validate());
            ensure!(
                out.expanding_edges().map_err(|e| e.to_string())?.iter().all(|&x| x),
                "result has a bounded edge"
            );
            let tt = out.is_train_track().map_err(|e| e.to_string())?.is_train_track;
            let irr = out.is_irreducible().map_err(|e| e.to_string())?;
            ensure!(!(was_tt && was_irr) || (tt && irr), "train track or irreducibility lost");
            // collapsing the bridge recovers the rose map
            let og = out.graph();
            let rg = rose.graph();
            for e in rg.edges() {
                let name = rg.edge_name(e);
                let f = og.edge_by_name(name).map_err(|e| e.to_string())?;
                let want: Vec<String> = rose.edge_image(e).iter().map(|d| rg.step_name(*d)).collect();
                let got: Vec<String> = out.edge_image(f).iter().map(|d| og.step_name(*d)).collect();
                ensure!(want == got, "edge {name}: {got:?} instead of {want:?}");
            }
            ensure!(tt && irr, "collapsed rose map should be a train track and irreducible");
        }
        Ok(())
    });
}

#[test]
fn criterion_11_euler_characteristic_and_presentation() {
    criterion(11, "mapping torus Euler characteristic and presentation", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed() ^ 11);
        let mut maps = vec![golden(), tribonacci(), golden_with_bridge()];
        for _ in 0..5 {
            let rose = random_positive_map(&mut rng);
            maps.push(blow_up(&rose));
            maps.push(rose);
        }
        for m in &maps {
            for l in 1..=3 {
                let tc = build_torus(m, l).map_err(|e| e.to_string())?;
                ensure!(tc.euler_characteristic() == 0, "chi = {} at L={l}", tc.euler_characteristic());
                ensure!(tc.census().euler_characteristic() == 0, "census chi nonzero at L={l}");
            }
        }
        let p = presentation(&golden(), 1).map_err(|e| e.to_string())?;
        let relators: Vec<String> = p.relators.iter().map(|r| p.format_word(r)).collect();
        ensure!(p.generators == vec!["a", "b", "z"], "generators {:?}", p.generators);
        ensure!(
            relators == vec!["z a z^-1 b^-1", "z b z^-1 a^-1 b^-1"],
            "relators {relators:?}"
        );
        Ok(())
    });
}
