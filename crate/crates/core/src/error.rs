use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("no hypothesis in the class is consistent with the sample")]
    NotRealizable,

    #[error("exhaustive shattering search over {size} atoms exceeds the cap of {cap}")]
    DomainTooLarge { size: usize, cap: usize },

    #[error("set size {0} is not a power of 4")]
    InvalidSize(usize),

    #[error("enumeration of {required} index vectors exceeds the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("index list of length {len} is not a power of the branching factor {branching}")]
    InvalidList { len: usize, branching: usize },

    #[error("bucket contains no index vectors")]
    EmptyBucket,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
