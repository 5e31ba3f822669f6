use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid block structure: {0}")]
    InvalidStructure(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry in block {block} at ({row}, {col})")]
    NonFiniteEntry { block: usize, row: usize, col: usize },
    #[error("elements belong to different block structures")]
    StructureMismatch,
    #[error("frames live in different ambient spaces ({0} vs {1})")]
    AmbientMismatch(usize, usize),
    #[error("requested rank {requested} exceeds ambient dimension {ambient}")]
    RankTooLarge { requested: usize, ambient: usize },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("operation requires a nonzero element")]
    ZeroElement,
    #[error("element is not rank one (rank {0})")]
    NotRankOne(usize),
    #[error("element is not a scalar multiple of a coisometry")]
    NotCoisometry,
    #[error("no blockwise witness available: {0}")]
    WitnessUnavailable(String),
    #[error("rank chain is not strictly increasing at link {0}")]
    ChainInconsistent(usize),
    #[error("top eigenspace has dimension {available}, chain of length {requested} requested")]
    EigenspaceTooSmall { requested: usize, available: usize },
    #[error("element is not in the domain of the table map")]
    DomainMiss,
    #[error("invalid preserver spec: {0}")]
    InvalidSpec(String),
    #[error("wild map broke the left frame invariants: {0}")]
    StructureViolation(String),
    #[error("image of a rank-one element in block {block} is supported on {support:?}, not a single block")]
    NotSingletonSupport { block: usize, support: Vec<usize> },
    #[error("blocks {0} and {1} are sent to the same block")]
    NotInjective(usize, usize),
    #[error("block {from} (dim {from_dim}) is sent to block {to} (dim {to_dim})")]
    DimensionMismatch {
        from: usize,
        to: usize,
        from_dim: usize,
        to_dim: usize,
    },
    #[error("norm of rank-one images is not constant (spread {spread:.3e})")]
    KappaNotConstant { spread: f64 },
    #[error("sandwich recovery inconsistent (residual {residual:.3e})")]
    RecoveryInconsistent { residual: f64 },
    #[error("operation needs a graph in {expected} mode, got {actual}")]
    WrongMode {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
}
