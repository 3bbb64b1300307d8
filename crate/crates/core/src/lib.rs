//! Combinatorial machinery for cubulating hyperbolic free-by-cyclic groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: finite graphs with their edge paths and points.
//! * [`map`]: graph self-maps, train tracks and invariant-forest collapse.
//! * [`perron`]: transition matrices and Perron–Frobenius data.
//! * [`dynamics`]: exact piecewise-linear dynamics on edges.
//! * [`leafspace`]: scaled metrics `d_n` and leaf-distance estimates.
//! * [`walls`]: busts and the immersed walls built from them.
//! * [`cubulation`]: finite wallspaces and their dual cube complexes.
//! * [`torus`]: mapping tori and presentations.
//! * [`format`], [`dot`], [`analysis`]: plumbing for the CLI and the demo.

pub mod analysis;
pub mod cubulation;
pub mod dot;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod graph;
pub mod leafspace;
pub mod map;
pub mod perron;
pub mod rational;
pub mod torus;
pub mod walls;

pub mod examples;

pub use error::{Error, Result};
pub use graph::{DirEdge, EdgeId, EdgePath, EdgePoint, Graph, Point, VertexId, Weighting};
pub use map::GraphMap;
pub use rational::Rat;
