use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("state 0 is absorbing and has no transition pair")]
    AbsorbingState,
    #[error("invalid start state {0}: must be at least 1")]
    InvalidStartState(u64),
    #[error("cannot parse number {0:?}: expected \"a/b\", \"a\" or a JSON number")]
    BadNumber(String),
    #[error("formula for l_n is undefined at state {0} (zero denominator)")]
    DegenerateFormula(u64),
    #[error("invalid chain: {0}")]
    Structure(String),
}

/// Diagnostics for chain-spec documents.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("malformed chain spec: {0}")]
    Malformed(String),
    #[error("unknown family tag {0:?}")]
    UnknownFamily(String),
    #[error("family {family:?} requires parameter {field:?}")]
    MissingParameter { family: String, field: String },
    #[error("unknown field {field:?} for family {family:?}")]
    UnknownField { family: String, field: String },
    #[error("{field} out of range: {reason}")]
    OutOfRange { field: String, reason: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("interval requires 0 <= a < start < b, got a={a}, start={start}, b={b}")]
    InvalidInterval { a: u64, start: u64, b: u64 },
    #[error("t_n underflowed to zero at n={0}; use exact arithmetic")]
    Underflow(u64),
    #[error(
        "chain is transient (extinction probability < 1); occupation formula needs certain extinction, \
         and the limiting expectation is trivially +inf in this case"
    )]
    Transient,
    #[error("extinction probability is inconclusive: {0}")]
    Inconclusive(String),
    #[error("limit of t_n is undetermined: {0}")]
    UndeterminedTail(String),
    #[error("occupation profile is not summable: {0}")]
    NonSummable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("truncation level {0} is degenerate: need N >= 2")]
    Degenerate(usize),
    #[error("start state {start} outside 0..{max}")]
    StartOutOfRange { start: usize, max: usize },
    #[error("tridiagonal elimination hit a near-singular pivot at row {0}")]
    NearSingular(usize),
    #[error("chain is transient: escape probability never drops below {0:e}")]
    Transient(f64),
    #[error("escape bound {bound:e} needs truncation beyond {limit}")]
    TruncationTooLarge { bound: f64, limit: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}
