//! Small maps shared by tests and the demo page.

use crate::graph::{Graph, VertexId};
use crate::map::GraphMap;

/// `a ↦ b, b ↦ b a` on the rose with two petals.
pub fn golden() -> GraphMap {
    GraphMap::rose(&[("a", "b"), ("b", "b a")]).expect("static example")
}

/// `a ↦ a b, b ↦ c, c ↦ a` on the rose with three petals.
pub fn tribonacci() -> GraphMap {
    GraphMap::rose(&[("a", "a b"), ("b", "c"), ("c", "a")]).expect("static example")
}

/// `a ↦ a a` on the circle.
pub fn doubling() -> GraphMap {
    GraphMap::rose(&[("a", "a a")]).expect("static example")
}

/// The golden map with its vertex blown up into a fixed bridge `c: u → w`.
/// Collapsing `c` recovers [`golden`].
pub fn golden_with_bridge() -> GraphMap {
    let g = Graph::new(
        &["u", "w"],
        &[("a", "u", "u"), ("b", "w", "w"), ("c", "u", "w")],
    )
    .expect("static example");
    let images = vec![
        g.steps("c b -c").expect("static example"),
        g.steps("b -c a c").expect("static example"),
        g.steps("c").expect("static example"),
    ];
    GraphMap::new(g, vec![VertexId(0), VertexId(1)], images, VertexId(0))
}

pub const GOLDEN_TEXT: &str = "\
# a -> b, b -> b a
vertices: v
edges:
  a: v v
  b: v v
map:
  v -> v
  a -> b
  b -> b a
basepoint: v
";

pub const TRIBONACCI_TEXT: &str = "\
vertices: v
edges:
  a: v v
  b: v v
  c: v v
map:
  v -> v
  a -> a b
  b -> c
  c -> a
basepoint: v
";
