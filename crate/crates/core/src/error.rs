use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate holding specification: no survival mass in state {state} at duration {duration}")]
    DegenerateHolding { state: usize, duration: usize },

    #[error("total evidence is zero: observed signals are incompatible with every state in the belief support")]
    TotalEvidenceZero,

    #[error("signal for task {task} is {value}, outside [0, 1]")]
    SignalOutOfRange { task: usize, value: f64 },

    #[error("likelihood vector is invalid: {0}")]
    InvalidLikelihood(String),

    #[error("improper gamma belief (alpha = {alpha}, beta = {beta})")]
    ImproperBelief { alpha: f64, beta: f64 },

    #[error("observation for pair {0} is not monitored; the update must be skipped")]
    UnmonitoredTick(String),

    #[error("unknown channel {0}")]
    UnknownChannel(u32),

    #[error("unknown entity {0}")]
    UnknownEntity(String),

    #[error("entity {0} is already present")]
    DuplicateEntity(String),

    #[error("edge {0} already exists")]
    DuplicateEdge(String),

    #[error("no edge between {0}")]
    UnknownEdge(String),

    #[error("unknown cell {0}")]
    UnknownCell(String),

    #[error("self-loop on entity {0}")]
    SelfLoop(String),

    #[error("cell {cell} is not connected")]
    DisconnectedCell { cell: String },

    #[error("tick mismatch: expected {expected}, got {got}")]
    TickMismatch { expected: u64, got: u64 },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), message: message.into() }
    }

    /// Stable machine-readable error name, used in CLI and HTTP error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::DegenerateHolding { .. } => "DegenerateHolding",
            Error::TotalEvidenceZero => "TotalEvidenceZero",
            Error::SignalOutOfRange { .. } => "SignalOutOfRange",
            Error::InvalidLikelihood(_) => "InvalidLikelihood",
            Error::ImproperBelief { .. } => "ImproperBelief",
            Error::UnmonitoredTick(_) => "UnmonitoredTick",
            Error::UnknownChannel(_) => "UnknownChannel",
            Error::UnknownEntity(_) => "UnknownEntity",
            Error::DuplicateEntity(_) => "DuplicateEntity",
            Error::DuplicateEdge(_) => "DuplicateEdge",
            Error::UnknownEdge(_) => "UnknownEdge",
            Error::UnknownCell(_) => "UnknownCell",
            Error::SelfLoop(_) => "SelfLoop",
            Error::DisconnectedCell { .. } => "DisconnectedCell",
            Error::TickMismatch { .. } => "TickMismatch",
            Error::Schema { .. } => "Schema",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string())
    }
}
