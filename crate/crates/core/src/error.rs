use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("left subtraction undefined: {0} > {1}")]
    NotLessEq(String, String),

    #[error("position {position} out of range for a set of order type {order_type}")]
    OutOfRange { position: String, order_type: String },

    #[error("{point} is not a member of {set}")]
    NotMember { point: String, set: String },

    #[error("order types differ: {0} vs {1}")]
    TypeMismatch(String, String),

    #[error("not a permutation: {0}")]
    NotPermutation(String),

    #[error("unregistered function id {0}")]
    Unregistered(u32),

    #[error("term longer than the bound {bound}: {len}")]
    TermTooLong { len: usize, bound: usize },

    #[error("atom violates normalization preconditions: {0}")]
    BadAtom(String),

    #[error("witness inconsistency: {0}")]
    Witness(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no allowed target: {0}")]
    NoTarget(String),

    #[error("budget exhausted after {spent} candidates: {context}")]
    BudgetExhausted { spent: u64, context: String },

    #[error("not coverable: {0}")]
    NotCoverable(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
