//! The mapping torus complex `X_L` and a presentation of its fundamental
//! group.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{reduce_steps, DirEdge, EdgeId, EdgePath, Graph, VertexId};
use crate::map::GraphMap;

/// A letter of an attaching word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Letter {
    Vertical(DirEdge),
    /// `t_w`, running from `w` to `φ^L(w)`, or its inverse.
    Horizontal { vertex: VertexId, inverse: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoCell {
    pub edge: EdgeId,
    /// `t_b⁻¹ e⁻¹ t_a φ^L(e)` for `e: a → b`, read from `φ^L(b)`.
    pub word: Vec<Letter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusComplex {
    pub power: usize,
    pub vertices: Vec<String>,
    pub vertical: Vec<String>,
    /// `horizontal[w] = φ^L(w)`.
    pub horizontal: Vec<VertexId>,
    pub cells: Vec<TwoCell>,
}

/// Cell counts by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub vertices: usize,
    pub vertical: usize,
    pub horizontal: usize,
    pub two_cells: usize,
}

impl Census {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - (self.vertical + self.horizontal) as i64 + self.two_cells as i64
    }

    /// A mapping torus always has Euler characteristic zero.
    pub fn is_consistent(&self) -> bool {
        self.euler_characteristic() == 0
    }
}

pub fn build_torus(map: &GraphMap, power: usize) -> Result<TorusComplex> {
    map.ensure_valid()?;
    let g = map.graph();
    let cells = g
        .edges()
        .map(|e| {
            let (a, b) = (g.edge(e).init, g.edge(e).term);
            let mut word = vec![
                Letter::Horizontal { vertex: b, inverse: true },
                Letter::Vertical(DirEdge::rev(e)),
                Letter::Horizontal { vertex: a, inverse: false },
            ];
            word.extend(
                map.iterate_edge(e, power, false)
                    .steps()
                    .iter()
                    .map(|&d| Letter::Vertical(d)),
            );
            TwoCell { edge: e, word }
        })
        .collect();
    Ok(TorusComplex {
        power,
        vertices: g.vertices().map(|v| g.vertex_name(v).to_string()).collect(),
        vertical: g.edges().map(|e| g.edge_name(e).to_string()).collect(),
        horizontal: g.vertices().map(|v| map.iterate_vertex(v, power)).collect(),
        cells,
    })
}

impl TorusComplex {
    pub fn census(&self) -> Census {
        Census {
            vertices: self.vertices.len(),
            vertical: self.vertical.len(),
            horizontal: self.horizontal.len(),
            two_cells: self.cells.len(),
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.census().euler_characteristic()
    }

    /// Endpoints of a letter, in reading order.
    fn ends(&self, g: &Graph, l: Letter) -> (VertexId, VertexId) {
        match l {
            Letter::Vertical(d) => (g.init(d), g.term(d)),
            Letter::Horizontal { vertex, inverse } => {
                let (s, t) = (vertex, self.horizontal[vertex.0]);
                if inverse {
                    (t, s)
                } else {
                    (s, t)
                }
            }
        }
    }

    /// Every attaching word is a closed path of the 1-skeleton.
    pub fn words_are_closed(&self, g: &Graph) -> bool {
        self.cells.iter().all(|c| {
            let ends: Vec<_> = c.word.iter().map(|&l| self.ends(g, l)).collect();
            ends.windows(2).all(|w| w[0].1 == w[1].0)
                && ends.first().map(|x| x.0) == ends.last().map(|x| x.1)
        })
    }

    /// Signed letter counts of a cell boundary: vertical edges, then
    /// horizontal edges.
    pub fn abelianized_boundary(&self, cell: usize) -> (Vec<i64>, Vec<i64>) {
        let mut vert = vec![0i64; self.vertical.len()];
        let mut horiz = vec![0i64; self.horizontal.len()];
        for l in &self.cells[cell].word {
            match *l {
                Letter::Vertical(d) => vert[d.edge.0] += if d.forward { 1 } else { -1 },
                Letter::Horizontal { vertex, inverse } => {
                    horiz[vertex.0] += if inverse { -1 } else { 1 }
                }
            }
        }
        (vert, horiz)
    }

    /// The vertical paths `P₀ = e, P₁ = φ(e), …, P_L = φ^L(e)` crossed by
    /// the long 2-cell of `e`.
    pub fn long_cell_paths(&self, map: &GraphMap, e: EdgeId) -> Vec<EdgePath> {
        (0..=self.power).map(|i| map.iterate_edge(e, i, false)).collect()
    }

    pub fn format_word(&self, g: &Graph, cell: usize) -> String {
        self.cells[cell]
            .word
            .iter()
            .map(|l| match *l {
                Letter::Vertical(d) => g.step_name(d),
                Letter::Horizontal { vertex, inverse } => {
                    let name = format!("t_{}", self.vertices[vertex.0]);
                    if inverse {
                        format!("{name}^-1")
                    } else {
                        name
                    }
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A generator or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenLetter {
    pub gen: usize,
    pub inverse: bool,
}

impl GenLetter {
    fn inv(self) -> Self {
        GenLetter {
            gen: self.gen,
            inverse: !self.inverse,
        }
    }
}

pub type Word = Vec<GenLetter>;

fn reduce_word(w: &[GenLetter]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&l.inv()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// `⟨x₁, …, x_r, z | z xᵢ z⁻¹ Φ(xᵢ)⁻¹⟩`; the stable letter is the last
/// generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: Vec<String>,
    /// `Φ(xᵢ)` in the free basis.
    pub images: Vec<Word>,
    pub relators: Vec<Word>,
}

impl Presentation {
    pub fn rank(&self) -> usize {
        self.images.len()
    }

    pub fn format_word(&self, w: &[GenLetter]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter()
            .map(|l| {
                let g = &self.generators[l.gen];
                if l.inverse {
                    format!("{g}^-1")
                } else {
                    g.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Signed generator counts of each `Φ(xᵢ)`.
    pub fn abelianized_images(&self) -> Vec<Vec<i64>> {
        self.images
            .iter()
            .map(|w| {
                let mut v = vec![0i64; self.rank()];
                for l in w {
                    v[l.gen] += if l.inverse { -1 } else { 1 };
                }
                v
            })
            .collect()
    }
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "generators: {}", self.generators.join(" "))?;
        writeln!(f, "relators:")?;
        for r in &self.relators {
            writeln!(f, "  {}", self.format_word(r))?;
        }
        Ok(())
    }
}

/// Spanning tree from the basepoint: the tree path to every vertex and a
/// flag for tree edges.
fn spanning_tree(g: &Graph, root: VertexId) -> (Vec<Vec<DirEdge>>, Vec<bool>) {
    let mut path: Vec<Option<Vec<DirEdge>>> = vec![None; g.vertex_count()];
    let mut in_tree = vec![false; g.edge_count()];
    path[root.0] = Some(Vec::new());
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for e in g.edges() {
            for d in [DirEdge::fwd(e), DirEdge::rev(e)] {
                let w = g.term(d);
                if g.init(d) == v && path[w.0].is_none() {
                    let mut p = path[v.0].clone().expect("visited");
                    p.push(d);
                    path[w.0] = Some(p);
                    in_tree[e.0] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    (path.into_iter().map(|p| p.expect("connected graph")).collect(), in_tree)
}

/// A presentation of the mapping torus group of `φ^L`.
pub fn presentation(map: &GraphMap, power: usize) -> Result<Presentation> {
    map.ensure_valid()?;
    let g = map.graph();
    let (tree_path, in_tree) = spanning_tree(g, map.basepoint());
    let basis: Vec<EdgeId> = g.edges().filter(|e| !in_tree[e.0]).collect();
    let mut gen_of = vec![None; g.edge_count()];
    for (i, e) in basis.iter().enumerate() {
        gen_of[e.0] = Some(i);
    }
    let read = |steps: &[DirEdge]| -> Word {
        let w: Word = steps
            .iter()
            .filter_map(|d| {
                gen_of[d.edge.0].map(|gen| GenLetter {
                    gen,
                    inverse: !d.forward,
                })
            })
            .collect();
        reduce_word(&w)
    };
    let images: Vec<Word> = basis
        .iter()
        .map(|&e| {
            let mut loop_steps = tree_path[g.edge(e).init.0].clone();
            loop_steps.push(DirEdge::fwd(e));
            loop_steps.extend(tree_path[g.edge(e).term.0].iter().rev().map(|d| d.reverse()));
            let mut steps = loop_steps;
            for _ in 0..power {
                steps = reduce_steps(&map.apply_steps(&steps));
            }
            read(&steps)
        })
        .collect();
    let mut generators: Vec<String> = basis.iter().map(|&e| g.edge_name(e).to_string()).collect();
    let mut z = String::from("z");
    while generators.contains(&z) {
        z.push('\'');
    }
    let zi = generators.len();
    generators.push(z);
    let zl = GenLetter { gen: zi, inverse: false };
    let relators = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let x = GenLetter { gen: i, inverse: false };
            let mut r = vec![zl, x, zl.inv()];
            r.extend(img.iter().rev().map(|l| l.inv()));
            r
        })
        .collect();
    Ok(Presentation {
        generators,
        images,
        relators,
    })
}
