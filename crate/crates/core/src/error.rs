use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("interval operation applied to an empty interval")]
    EmptyOperand,
    #[error("gcd of an all-zero list is undefined")]
    AllZero,
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("malformed interval {0}")]
    BadInterval(String),
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsafe rule: variable {variable} of the head does not occur in the body of `{rule}`")]
    UnsafeRule { rule: String, variable: String },
    #[error("operator not allowed in a rule head: `{0}`")]
    ForbiddenHead(String),
    #[error("operator interval {0} must be non-empty and non-negative")]
    BadOperatorInterval(String),
    #[error("predicate {predicate} used with arities {first} and {second}")]
    ArityConflict { predicate: String, first: usize, second: usize },
    #[error("fact `{0}` is not ground")]
    NonGround(String),
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("invalid generator specification: {0}")]
    Generator(String),
    #[error("search cancelled")]
    Cancelled,
    #[error("automaton state limit of {0} exceeded")]
    StateLimit(usize),
}
