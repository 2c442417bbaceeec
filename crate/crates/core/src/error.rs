use std::path::PathBuf;

/// Errors raised across the crate. The `Display` text starts with a stable
/// kebab-case token so reports and exit messages can be matched by scripts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid-grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite: {0}")]
    NonFinite(String),
    #[error("empty-box: {0}")]
    EmptyBox(String),
    #[error("not-convex: {0}")]
    NotConvex(String),
    #[error("origin-not-interior")]
    OriginNotInterior,
    #[error("empty-body")]
    EmptyBody,
    #[error("not-converged after {sweeps} sweeps (residual {residual:.3e})")]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("negative-source")]
    NegativeSource,
    #[error("nonpositive-boundary")]
    NonpositiveBoundary,
    #[error("too-few-nodes: {0}")]
    TooFewNodes(String),
    #[error("on-boundary: x_n = {0}")]
    OnBoundary(f64),
    #[error("slice-not-convex at x_n = {0}")]
    SliceNotConvex(f64),
    #[error("diagonal: kernel evaluated at x = y")]
    Diagonal,
    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported-dimension: {0}")]
    UnsupportedDimension(usize),
    #[error("depth-exceeded: recursion reached depth {0}")]
    DepthExceeded(usize),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The leading token of the message, e.g. `not-converged`.
    pub fn token(&self) -> String {
        let text = self.to_string();
        text.split([':', ' '])
            .next()
            .unwrap_or_default()
            .to_string()
    }
}
