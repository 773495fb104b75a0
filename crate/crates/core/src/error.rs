use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: dimension mismatches, invalid parameters, malformed input.
    #[error("usage error: {0}")]
    Usage(String),

    /// The covariance matrix could not be factorized even with maximal jitter.
    #[error(
        "covariance factorization failed for alpha={alpha} on a site set of diameter {diameter} \
         (largest jitter tried: {jitter:e})"
    )]
    Factorization {
        alpha: f64,
        diameter: f64,
        jitter: f64,
    },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error(
        "cluster cap of {cap} reached without termination (last V = {last_v}, remaining gap = {gap})"
    )]
    ClusterCap { cap: u64, last_v: f64, gap: f64 },

    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
