use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A layout, scenario or parameter set violates one of its invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("wall extent {extent} m is not a multiple of tile size {tile} m")]
    NonDivisibleExtent { extent: f64, tile: f64 },

    #[error("invalid bounds: lo={lo}, hi={hi}, exponent={exponent}")]
    InvalidBounds { lo: f64, hi: f64, exponent: f64 },

    #[error("progress {0} outside [0, 1]")]
    ProgressOutOfRange(f64),

    #[error("source lies on the wall plane")]
    SourceOnWall,

    #[error("coincident points in cascade link")]
    CoincidentPoints,

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate sample: zero variance")]
    ZeroVariance,

    #[error("histogram binning mismatch")]
    BinningMismatch,

    #[error("empty input")]
    EmptyInput,

    #[error("series too short: length {len}, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than the environment.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
