use thiserror::Error;

/// Library-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary linear system for TBG polynomial h_{k} is numerically singular (residual {residual:.3e})")]
    SingularBoundarySystem { k: usize, residual: f64 },

    #[error("singular input gain |g| < 1e-12 for agent {agent} at t = {time}: state {state:?}")]
    SingularInputGain {
        agent: usize,
        time: f64,
        state: Vec<f64>,
    },

    #[error("discrete terminal boundary solve for the feedforward gain schedule is singular")]
    SingularGainSchedule,

    #[error("non-finite state for agent {agent} at t = {time} (divergence)")]
    Divergence { agent: usize, time: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    ScenarioInvalid(Vec<String>),

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),

    #[error("zero-delay mode requires an acyclic follower graph, but it contains a cycle")]
    CyclicFollowerGraph,

    #[error("unknown plot series '{0}'; valid options: states, errors, surfaces, inputs")]
    UnknownSeries(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
