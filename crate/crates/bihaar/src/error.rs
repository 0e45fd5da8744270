use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("value vector has wrong length: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("functions defined on different grids")]
    GridMismatch,

    #[error("cube level {level} or position {pos} not on the grid")]
    InvalidCube { level: usize, pos: usize },

    #[error("shift complexity ({i1},{i2}),({j1},{j2}) not admissible at depths ({k1},{k2})")]
    InadmissibleComplexity {
        i1: usize,
        i2: usize,
        j1: usize,
        j2: usize,
        k1: usize,
        k2: usize,
    },

    #[error("shift coefficient {value} exceeds the normalization bound {bound}")]
    CoefficientBound { value: f64, bound: f64 },

    #[error("input must be fully cancellative; project it first (max stray component {0:.3e})")]
    NotFullyCancellative(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse: {0}")]
    Parse(String),
}
