use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SigClustError>;

#[derive(Debug, Error)]
pub enum SigClustError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Every entry of the matrix is identical, so the MAD noise estimate is zero.
    #[error("degenerate noise: median absolute deviation is zero (all entries identical)")]
    DegenerateNoise,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// `d * sigma^2` exceeds the sample trace, so no offset can match the trace.
    #[error(
        "no soft-threshold offset matches the trace: d*sigma^2 = {floor_total} > trace = {trace}"
    )]
    NoTraceSolution { floor_total: f64, trace: f64 },

    /// The spike does not separate from the Marchenko-Pastur bulk.
    #[error("spike {v} does not exceed the bulk threshold 1 + sqrt(rho) = {threshold}; bulk edges [{lower_edge}, {upper_edge}]")]
    SpikeBelowBulk {
        v: f64,
        threshold: f64,
        upper_edge: f64,
        lower_edge: f64,
    },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("exhaustive search supports at most {max} observations, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid spectra: {0}")]
    InvalidSpectra(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SigClustError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SigClustError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SigClustError::Parse { .. } => 3,
            SigClustError::InvalidData(_) => 4,
            SigClustError::DegenerateNoise | SigClustError::DegenerateData(_) => 5,
            SigClustError::Io { .. } => 6,
            SigClustError::InvalidConfig(_)
            | SigClustError::InvalidLabels(_)
            | SigClustError::InvalidSpectra(_) => 7,
            SigClustError::NoTraceSolution { .. }
            | SigClustError::SpikeBelowBulk { .. }
            | SigClustError::TooLarge { .. } => 1,
        }
    }
}
