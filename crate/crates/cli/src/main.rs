use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use fbcube_core::analysis::analyze;
use fbcube_core::cubulation::{dual_complex, CubeSkeleton, Wallspace, DEFAULT_MEDIAN_CAP, DEFAULT_SIZE_CAP};
use fbcube_core::dynamics::{level, minimal_period, periodic_points, Level};
use fbcube_core::leafspace::{leaf_distance, AnchoredPath, MetricMap, MetricPoint};
use fbcube_core::perron::{perron_eigen, TransitionMatrix, DEFAULT_TOL};
use fbcube_core::rational::{fmt_rat, parse_rat, to_f64};
use fbcube_core::torus::{build_torus, presentation, Census};
use fbcube_core::walls::{
    approximate_wall, build_wall, check_busts, check_wall, choose_busts, cubulation_constants, BustSystem,
};
use fbcube_core::{dot, format, EdgePoint, GraphMap, Point};

/// Tolerance and window used when reporting whether `d_n` has settled.
const DMETRIC_TOL: f64 = 1e-9;
const DMETRIC_WINDOW: usize = 3;
/// Period bound used when reporting minimal periods.
const PERIOD_SEARCH: usize = 64;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] fbcube_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "fbcube", version, about = "Train tracks, walls and cube complexes for free-by-cyclic groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph map and report train track and Perron-Frobenius data.
    Analyze {
        file: PathBuf,
        /// Also write the report as JSON.
        #[arg(long, value_name = "out.json")]
        json: Option<PathBuf>,
    },
    /// Collapse the invariant forest of non-expanding edges.
    Collapse {
        file: PathBuf,
        #[arg(short = 'o', value_name = "out.gm")]
        output: Option<PathBuf>,
    },
    /// Choose primary busts around anchors and check them.
    Busts {
        file: PathBuf,
        #[arg(long, value_name = "L")]
        tunnel: usize,
        /// Anchor point `edge:p/q`; may be repeated.
        #[arg(long, value_name = "e:p/q", required = true)]
        anchor: Vec<String>,
        #[arg(long, value_name = "r")]
        eps: Option<String>,
        /// Print the bust system and checks as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build the immersed walls for busts around the given anchors.
    Wall {
        file: PathBuf,
        #[arg(long, value_name = "L")]
        tunnel: usize,
        #[arg(long, value_name = "e:p/q", num_args = 1.., required = true)]
        anchors: Vec<String>,
        #[arg(long, value_name = "out.dot")]
        dot: Option<PathBuf>,
        /// Run the wall and approximation checks; exit 1 if any fails.
        #[arg(long)]
        check: bool,
    },
    /// Print the level of a point.
    Level {
        file: PathBuf,
        #[arg(long, value_name = "e:p/q")]
        point: String,
        #[arg(long, value_name = "L")]
        depth: usize,
        #[arg(long)]
        dot: bool,
    },
    /// Scaled distances d_0..d_N between two points, positions read in the
    /// Perron-Frobenius metric chart.
    Dmetric {
        file: PathBuf,
        #[arg(long, value_name = "e:p/q")]
        from: String,
        #[arg(long, value_name = "e:p/q")]
        to: String,
        #[arg(long, value_name = "N")]
        depth: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Interior fixed points of a power of the map on one edge.
    Periodic {
        file: PathBuf,
        #[arg(long, value_name = "e")]
        edge: String,
        #[arg(long, value_name = "L")]
        power: usize,
    },
    /// Quasiconvexity constants and the tunnel bound L0.
    Constants {
        #[arg(long)]
        l1: f64,
        #[arg(long)]
        l2: f64,
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "B", value_name = "B")]
        b: f64,
    },
    /// Dual cube complex of a finite wallspace given as JSON.
    Dual {
        file: PathBuf,
        #[arg(long, value_name = "d")]
        max_dim: Option<usize>,
        #[arg(long)]
        dot: bool,
    },
    /// Cell census of the mapping torus, or a presentation of its group.
    Torus {
        file: PathBuf,
        #[arg(long, value_name = "L")]
        power: usize,
        #[arg(long)]
        presentation: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load(path: &Path) -> Result<GraphMap> {
    Ok(format::parse(&read(path)?)?)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn show_point(map: &GraphMap, p: &EdgePoint) -> String {
    map.graph().format_point(&Point::Edge(p.clone()))
}

fn anchors(map: &GraphMap, texts: &[String]) -> Result<Vec<EdgePoint>> {
    texts
        .iter()
        .map(|t| Ok(format::parse_edge_point(map.graph(), t)?))
        .collect()
}

fn bust_text(map: &GraphMap, sys: &BustSystem) -> String {
    let g = map.graph();
    let mut s = format!("tunnel length {}\n", sys.power);
    for (i, b) in sys.busts.iter().enumerate() {
        s += &format!(
            "bust {i}: {}[{}, {}]\n",
            g.edge_name(b.edge),
            fmt_rat(&b.interval.lo),
            fmt_rat(&b.interval.hi)
        );
    }
    for sb in &sys.secondary {
        s += &format!(
            "  secondary of {}: {}[{}, {}]{}\n",
            sb.primary,
            g.edge_name(sb.edge),
            fmt_rat(&sb.interval.lo),
            fmt_rat(&sb.interval.hi),
            if sb.reversed { " reversed" } else { "" }
        );
    }
    s
}

fn level_text(map: &GraphMap, lv: &Level) -> String {
    fn walk(map: &GraphMap, lv: &Level, i: usize, out: &mut String) {
        let n = &lv.nodes[i];
        out.push_str(&"  ".repeat(n.depth));
        out.push_str(&map.graph().format_point(&n.point));
        out.push('\n');
        for c in lv.children(i).collect::<Vec<_>>() {
            walk(map, lv, c, out);
        }
    }
    let mut s = String::new();
    walk(map, lv, 0, &mut s);
    s
}

#[derive(Serialize)]
struct DualReport<'a> {
    chambers: &'a [String],
    cube_counts: &'a [usize],
    dimension: usize,
    connected: bool,
    median: bool,
    median_witness: Option<(usize, usize, usize)>,
    skeleton: &'a CubeSkeleton,
}

#[derive(Serialize)]
struct TorusReport {
    power: usize,
    census: Census,
    euler_characteristic: i64,
    words: Vec<String>,
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Analyze { file, json: out } => {
            let map = format::parse_unchecked(&read(&file)?)?;
            let r = analyze(&map)?;
            if let Some(path) = out {
                write(&path, &(r.to_json() + "\n"))?;
            }
            println!("valid: {}", r.valid);
            for v in &r.validation {
                println!("  {v}");
            }
            if let Some(tt) = &r.train_track {
                println!("train track: {}", tt.is_train_track);
                if let Some(w) = &tt.witness {
                    println!(
                        "  backtrack in image {} of edge {} at position {}",
                        w.iterate,
                        map.graph().edge_name(w.edge),
                        w.index
                    );
                }
            }
            if let Some(irr) = r.irreducible {
                println!("irreducible: {irr}");
            }
            if let Some(exp) = &r.expanding_edges {
                let names: Vec<String> = r
                    .edges
                    .iter()
                    .zip(exp)
                    .map(|(e, x)| format!("{e}={x}"))
                    .collect();
                println!("expanding: {}", names.join(" "));
            }
            if let Some(m) = &r.transition_matrix {
                println!("transition matrix: {m:?}");
            }
            if let (Some(ev), Some(w)) = (r.eigenvalue, &r.weights) {
                println!("eigenvalue: {ev:.12}");
                println!("weights: {w:?}");
            }
            if let Some(x) = &r.expansion {
                println!("expansion residual: {:.3e} (within tolerance: {})", x.max_residual, x.within_tol);
            }
            Ok(if r.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Collapse { file, output } => {
            let map = load(&file)?;
            let rep = map.collapse_invariant_forest()?;
            let text = format::serialize(&rep.map);
            eprintln!(
                "collapsed {} edge(s) in {} round(s): {}",
                rep.collapsed_edges.len(),
                rep.rounds,
                rep.collapsed_edges.join(" ")
            );
            match output {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Busts {
            file,
            tunnel,
            anchor,
            eps,
            json: as_json,
        } => {
            let map = load(&file)?;
            let points = anchors(&map, &anchor)?;
            let eps = eps.map(|e| parse_rat(&e)).transpose()?;
            let sys = choose_busts(&map, tunnel, &points, eps.as_ref())?;
            let report = check_busts(&map, &sys, eps.as_ref());
            if as_json {
                #[derive(Serialize)]
                struct Out<'a> {
                    busts: &'a BustSystem,
                    checks: &'a fbcube_core::walls::CheckReport,
                }
                print!("{}", json(&Out { busts: &sys, checks: &report }));
            } else {
                print!("{}{report}", bust_text(&map, &sys));
            }
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Wall {
            file,
            tunnel,
            anchors: texts,
            dot: dot_out,
            check,
        } => {
            let map = load(&file)?;
            let points = anchors(&map, &texts)?;
            let sys = choose_busts(&map, tunnel, &points, None)?;
            let wall = build_wall(&map, &sys)?;
            print!("{}", bust_text(&map, &sys));
            println!(
                "nucleus fragments: {} in {} component(s)",
                wall.fragments.len(),
                wall.nucleus_component_count
            );
            println!("tunnels: {}", wall.tunnels.len());
            println!("immersed walls: {}", wall.component_count);
            println!("knockouts: {}", wall.knockouts().len());
            if let Some(path) = dot_out {
                write(&path, &dot::wall_dot(map.graph(), &wall))?;
            }
            if !check {
                return Ok(ExitCode::SUCCESS);
            }
            let report = check_wall(&map, &wall);
            print!("{report}");
            let approx = approximate_wall(&map, &wall);
            let approx_ok = match &approx {
                Ok(a) => {
                    println!("PASS approximation avoids open busts");
                    println!(
                        "{} slopes of different busts have disjoint images",
                        if a.slopes_disjoint { "PASS" } else { "FAIL" }
                    );
                    a.slopes_disjoint
                }
                Err(e) => {
                    println!("FAIL approximation avoids open busts: {e}");
                    false
                }
            };
            Ok(if report.all_passed() && approx_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Level { file, point, depth, dot: as_dot } => {
            let map = load(&file)?;
            let p = Point::Edge(format::parse_edge_point(map.graph(), &point)?);
            let lv = level(&map, &p, depth);
            if as_dot {
                print!("{}", dot::level_dot(map.graph(), &lv));
            } else {
                print!("{}", level_text(&map, &lv));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Dmetric {
            file,
            from,
            to,
            depth,
            csv,
        } => {
            let map = load(&file)?;
            let g = map.graph();
            let x = format::parse_edge_point(g, &from)?;
            let y = format::parse_edge_point(g, &to)?;
            let pd = perron_eigen(&TransitionMatrix::of(&map), DEFAULT_TOL)?;
            let mm = MetricMap::new(&map, &pd)?;
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
            let est = leaf_distance(&mm, &path, depth, DMETRIC_TOL, DMETRIC_WINDOW)?;
            if csv {
                print!("{}", est.to_csv());
            } else {
                for (n, d) in est.values.iter().enumerate() {
                    println!("d_{n} = {d:.12}");
                }
                println!("estimate: {:.12} (stabilized: {})", est.estimate, est.stabilized);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Periodic { file, edge, power } => {
            let map = load(&file)?;
            let e = map.graph().edge_by_name(&edge)?;
            let pp = periodic_points(&map, e, power)?;
            for fp in &pp.interior {
                let p = Point::Edge(fp.point.clone());
                let period = minimal_period(&map, &p, PERIOD_SEARCH.max(power))
                    .map_or("?".to_string(), |k| k.to_string());
                println!("{} period {period}", show_point(&map, &fp.point));
            }
            if !pp.endpoint_fixed.is_empty() {
                let ends: Vec<String> = pp.endpoint_fixed.iter().map(fmt_rat).collect();
                println!("fixed endpoints: {}", ends.join(" "));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Constants {
            l1,
            l2,
            m1,
            m2,
            delta,
            b,
        } => {
            let c = cubulation_constants(l1, l2, m1, m2, delta, b)?;
            println!("kappa1 = {}", c.kappa1);
            println!("kappa2 = {}", c.kappa2);
            println!("L0 = {}", c.l0);
            Ok(ExitCode::SUCCESS)
        }
        Command::Dual { file, max_dim, dot: as_dot } => {
            let ws = Wallspace::from_json(&read(&file)?)?;
            let sk = dual_complex(&ws, max_dim.unwrap_or(ws.wall_count()), DEFAULT_SIZE_CAP)?;
            if as_dot {
                print!("{}", dot::skeleton_dot(&sk, ws.chambers()));
                return Ok(ExitCode::SUCCESS);
            }
            let median = sk.is_median(DEFAULT_MEDIAN_CAP)?;
            print!(
                "{}",
                json(&DualReport {
                    chambers: ws.chambers(),
                    cube_counts: &sk.cube_counts,
                    dimension: sk.dimension,
                    connected: sk.is_connected(),
                    median: median.is_median,
                    median_witness: median.witness,
                    skeleton: &sk,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Torus {
            file,
            power,
            presentation: want_presentation,
        } => {
            let map = load(&file)?;
            if want_presentation {
                print!("{}", presentation(&map, power)?);
                return Ok(ExitCode::SUCCESS);
            }
            let tc = build_torus(&map, power)?;
            let census = tc.census();
            let words = (0..tc.cells.len()).map(|i| tc.format_word(map.graph(), i)).collect();
            print!(
                "{}",
                json(&TorusReport {
                    power,
                    census,
                    euler_characteristic: census.euler_characteristic(),
                    words,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
