use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter θ[{index}] = {value} is within {guard:e} of a score singularity")]
    SingularParameter { index: usize, value: f64, guard: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel is not row-stochastic: {0}")]
    NonStochastic(String),

    #[error("output column {column} mixes zero and nonzero entries")]
    ZeroColumn { column: usize },

    #[error("alphabet of {size} symbols exceeds the materialization cap of {cap}")]
    CapExceeded { size: f64, cap: usize },

    #[error("no feasible subsampling level: {0}")]
    InfeasiblePrivacy(String),

    #[error("unsupported setting: {0}")]
    Unsupported(String),

    #[error("bound hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no reports to aggregate")]
    EmptyReports,

    #[error("θ̂[{index}] = {value} exceeds the group cap {cap}")]
    ExceedsCap { index: usize, value: f64, cap: f64 },

    #[error("channel certifies ε* = {certified} above its nominal ε = {nominal}")]
    EpsViolation { certified: f64, nominal: f64 },

    #[error("privacy budget exceeded for node {node}: log-ratio {log_ratio} > ε = {eps} (history {history:?})")]
    BudgetExceeded {
        node: usize,
        log_ratio: f64,
        eps: f64,
        history: Vec<usize>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
