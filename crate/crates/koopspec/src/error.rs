//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KoopError {
    #[error("atom count {0} is not a power of two and no binary grouping was supplied")]
    NonDyadicAtomCount(usize),
    #[error("tree level {level} would hold {atoms} atoms, above the limit {limit}")]
    DepthOverflow { level: u32, atoms: usize, limit: usize },
    #[error("level {level} is outside the built range 0..={depth}")]
    LevelOutOfRange { level: u32, depth: u32 },
    #[error("no atom with index {index} at level {level}")]
    UnknownAtom { level: u32, index: usize },
    #[error("point {0} does not belong to the space")]
    PointOutsideSpace(String),
    #[error("map declares neither measure preservation nor a density bound")]
    UnknownDensity,
    #[error("requested {requested} elements but the tree supports {available}")]
    CountExceedsTree { requested: usize, available: usize },
    #[error("element index {index} out of range (cutoff {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("input cannot be resolved to exact cell integrals: {0}")]
    UnresolvableInput(String),
    #[error("Gram system is singular at pivot {0}")]
    SingularGram(usize),
    #[error("unsupported space for this construction: {0}")]
    UnsupportedSpace(String),
    #[error("no net point satisfies the normalisation band")]
    EmptyNet,
    #[error("dual functionals were not built up to the requested size")]
    DualsMissing,
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("map has no declared modulus of continuity")]
    ModulusMissing,
    #[error("space model has non-rational masses")]
    IrrationalMassModel,
    #[error("empty input set")]
    EmptyInput,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("partition refinement exceeded {0} blocks")]
    InfiniteRefinement(usize),
    #[error("candidate set is empty")]
    EmptyCandidate,
    #[error("quadrature level {level} needs {cells} cells, above the limit {limit}")]
    QuadratureTooFine { level: u32, cells: u64, limit: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl KoopError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            KoopError::Config(_)
            | KoopError::InvalidParameter(_)
            | KoopError::NonDyadicAtomCount(_)
            | KoopError::UnsupportedSpace(_)
            | KoopError::Io(_) => 2,
            KoopError::PointOutsideSpace(_) | KoopError::ModulusMissing | KoopError::UnknownDensity => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for KoopError {
    fn from(e: std::io::Error) -> Self {
        KoopError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KoopError {
    fn from(e: serde_json::Error) -> Self {
        KoopError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KoopError>;
