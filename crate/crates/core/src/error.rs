use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    TraceNotUnit { trace: f64 },

    #[error("density operator has eigenvalue {min_eigenvalue:.3e} below the positivity tolerance")]
    NegativeEigenvalue { min_eigenvalue: f64 },

    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outcome {lambda} is impossible for this state (p = {probability:.3e})")]
    ImpossibleOutcome { lambda: usize, probability: f64 },

    #[error("integration failed at t = {time}: {source}")]
    Integration {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario `{name}`: {source}")]
    Scenario {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the error stems from malformed input rather than a
    /// computed outcome.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::ImpossibleOutcome { .. } | Error::Integration { .. } => false,
            Error::Scenario { source, .. } | Error::Trial { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
