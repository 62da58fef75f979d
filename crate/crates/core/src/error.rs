use thiserror::Error;

/// Unified error type for the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: T = {t} but at least {min} observations are required")]
    SeriesTooShort { t: usize, min: usize },

    #[error("non-finite value in input {0}")]
    NonFinite(&'static str),

    #[error("smoothing window too small: L = {l} must be at least K = {k} for invertibility")]
    WindowTooSmall { l: usize, k: usize },

    #[error("series too short for the requested window: no complete smoothing window fits")]
    NoWindows,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("model is not stable: companion spectral radius {radius} >= 1")]
    Unstable { radius: f64 },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error(
        "ill-conditioned spectral estimate (condition number {cond:.3e}); \
         a larger smoothing window usually fixes this"
    )]
    IllConditioned { cond: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty candidate grid: {0}")]
    EmptyGrid(&'static str),

    #[error("restricted design is rank deficient")]
    RankDeficient,

    #[error("insufficient history: need at least {need} observations, got {got}")]
    InsufficientHistory { need: usize, got: usize },

    #[error("forecast horizon {h} exceeds the test window of length {t_test}")]
    HorizonTooLong { h: usize, t_test: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown model fixture '{0}' (expected model1, model2, model3, or random-sparse)")]
    UnknownFixture(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
