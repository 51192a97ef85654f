//! Error type shared by every stage of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A malformed input file. Line numbers are 1-based.
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// The integer speed-up search box is empty.
    #[error("infeasible speed-up problem: {constraint} ({detail})")]
    Infeasible { constraint: String, detail: String },

    #[error("frame {frame}: missing {feature}")]
    MissingFeature { frame: usize, feature: &'static str },

    #[error("frames {frame_a} and {frame_b} share {found} tracks, need at least 4")]
    InsufficientCorrespondences {
        frame_a: usize,
        frame_b: usize,
        found: usize,
    },

    /// Rank-deficient estimation input (collinear points, parallel flow, ...).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("no consensus model: best inlier count {best} is below 4")]
    NoModel { best: usize },

    /// The matrix has an eigenvalue on the negative real axis, so the
    /// principal fractional power does not exist.
    #[error("non-principal matrix power: eigenvalue on the negative real axis")]
    NonPrincipalPower,

    #[error("unstabilizable: {0}")]
    Unstabilizable(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Process exit code for the CLI: 2 format, 3 infeasible, 4 unstabilizable.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Format { .. } | Error::Json { .. } => 2,
            Error::Infeasible { .. } => 3,
            Error::Unstabilizable(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
