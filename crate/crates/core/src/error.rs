use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("axiom violation: {axiom} fails at basis witness {witness:?}")]
    AxiomViolation {
        axiom: &'static str,
        witness: Vec<usize>,
    },
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("field mismatch between algebras")]
    FieldMismatch,
    #[error("real algebra received a value with nonzero imaginary part ({0:e})")]
    RealViolation(f64),
    #[error("element does not belong to this algebra")]
    AlgebraMismatch,
    #[error("tensor spaces differ: {0} vs {1}")]
    SpaceMismatch(String, String),
    #[error("coefficient budget exceeded: {requested} > {budget}")]
    BudgetExceeded { requested: usize, budget: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("position metadata mismatch: {0}")]
    PositionMismatch(String),
    #[error("factor {factor} has role {found}, operator needs {expected}")]
    FactorRole {
        factor: usize,
        expected: &'static str,
        found: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("operator chain does not type-check: {0}")]
    ChainMismatch(String),
    #[error("slot `{0}` is not bound")]
    UnboundSlot(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("unknown occurrence {0}")]
    UnknownOccurrence(usize),
    #[error("missing parameter block `{0}`")]
    MissingBlock(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("truncation overflow: product of basis {i} and {j} leaves the truncated range")]
    TruncationOverflow { i: usize, j: usize },
    #[error("unsupported scalar op: {0}")]
    UnsupportedOp(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("direction is not unit norm (|r| = {0})")]
    NonUnitDirection(f64),
    #[error("lift inapplicable: {0}")]
    LiftInapplicable(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("training diverged at step {step}")]
    Divergence { step: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
