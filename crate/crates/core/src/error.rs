use thiserror::Error;

/// Errors produced by the calibration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the admissible domain of an operation.
    #[error("domain error in `{field}`: {message}")]
    Domain { field: String, message: String },

    /// Array or vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The ODE integrator could not meet its tolerance.
    #[error("integrator failed on interval {interval}: residual {residual:e} after {substeps} substeps")]
    Integrator {
        interval: usize,
        residual: f64,
        substeps: usize,
    },

    /// A correlation was requested for a constant vector.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Training targets span a zero range, so relative errors are undefined.
    #[error("degenerate targets: {0}")]
    DegenerateTarget(String),

    /// The training loss became non-finite.
    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    /// Inconsistent or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input document or data file.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    /// Observation data unusable for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    #[error("net `{net}`: {source}")]
    Net {
        net: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Tags an error with the identity of the network that produced it.
    pub fn for_net(self, net: impl Into<String>) -> Self {
        Error::Net {
            net: net.into(),
            source: Box::new(self),
        }
    }

    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any net or stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Net { source, .. } | Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let location = match e.position() {
            Some(pos) => format!("line {}", pos.line()),
            None => "csv".to_string(),
        };
        Error::parse(location, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
