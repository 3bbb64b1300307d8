use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("path is not concatenable at step {index}")]
    NotConcatenable { index: usize },
    #[error("points lie on different edges")]
    DifferentEdges,
    #[error("no weight for edge index {0}")]
    MissingWeight(usize),
    #[error("invalid graph map: {}", .0.join("; "))]
    InvalidMap(Vec<String>),
    #[error("invariant forest component containing edge `{edge}` has a cycle")]
    ForestHasCycle { edge: String },
    #[error("transition matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("edge `{0}` is not expanding")]
    NotExpanding(String),
    #[error("no periodic point within tolerance up to power {reached}")]
    PeriodCapExceeded { reached: usize },
    #[error("the leaf-distance sequence increased at step {step}: {previous} -> {next}")]
    Monotonicity { step: usize, previous: f64, next: f64 },
    #[error("candidate pool exhausted for edge `{edge}` at period cap {cap}")]
    CandidatesExhausted { edge: String, cap: usize },
    #[error("invalid bust request: {0}")]
    InvalidBust(String),
    #[error("anchors {0} and {1} have equal images under the tunnel power")]
    CoincidentAnchorImages(usize, usize),
    #[error("no admissible busts found after {rounds} shrinking rounds")]
    BustsNotFound { rounds: usize },
    #[error("level part rooted at bust {bust} meets a vertex")]
    LevelHitsVertex { bust: usize },
    #[error("nucleus approximation meets open primary bust {bust}")]
    AvoidsBustViolated { bust: usize },
    #[error("anchor {0} is not periodic with the declared period")]
    NotPeriodic(usize),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("invalid wallspace: {0}")]
    InvalidWallspace(String),
    #[error("size cap of {cap} exceeded")]
    SizeCap { cap: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}
