use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("order relation has a cycle through `{0}` and `{1}`")]
    Cycle(String, String),

    #[error("unknown poset element `{0}`")]
    UnknownElement(String),

    #[error("vertex `{0}` has no self-edge")]
    MissingSelfEdge(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("coordinate index {index} out of range for a space of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("assignment is not global: no value at `{0}`")]
    NotGlobal(String),

    #[error("assignment supports differ: {0}")]
    SupportMismatch(String),

    #[error("assignment is not a section: gap {gap} on `{from}` <= `{to}`")]
    NotASection { from: String, to: String, gap: f64 },

    #[error("restrictions do not compose along `{0}` <= `{1}` <= `{2}` (gap {3})")]
    Functoriality(String, String, String, f64),

    #[error("morphism component at `{element}` breaks commutativity by {gap} > {bound}")]
    MorphismDefect { element: String, gap: f64, bound: f64 },

    #[error("`{0}` is not strictly below `{1}`")]
    NotRelated(String, String),

    #[error("missing value for `{0}`")]
    MissingValue(String),

    #[error("invalid network problem: {0}")]
    InvalidProblem(String),

    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),

    #[error("invalid thresholding scheme: {0}")]
    SchemeInvalid(String),

    #[error("dynamics at `{vertex}` disagree with the affine coefficients: {detail}")]
    InconsistentDynamics { vertex: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid nominal states at `{0}`: {1}")]
    InvalidNominal(String, String),
}
