use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst index must lie in [0.5, 1), got {0}")]
    InvalidHurst(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unordered arguments: need s <= t and x <= y, got s={s}, t={t}, x={x}, y={y}")]
    UnorderedArguments { s: f64, t: f64, x: f64, y: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("circulant embedding has a negative eigenvalue {min} (max {max})")]
    NonPositiveSpectrum { min: f64, max: f64 },

    #[error("quadrature did not converge: {coarse} vs {fine}")]
    QuadratureNotConverged { coarse: f64, fine: f64 },

    #[error("{0}")]
    OutOfRegime(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("unsupported Hermite order {0} (supported: 1..=3)")]
    UnsupportedOrder(u32),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownFamily,
    UnknownKey,
    BadArity,
    MalformedNumber,
    InvalidParameter,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::UnknownFamily => "unknown family",
            ParseErrorKind::UnknownKey => "unknown key",
            ParseErrorKind::BadArity => "bad arity",
            ParseErrorKind::MalformedNumber => "malformed number",
            ParseErrorKind::InvalidParameter => "invalid parameter",
        };
        f.write_str(s)
    }
}

/// Integrand spec-string error; `position` is the byte offset of `token`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}: `{token}`")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub token: String,
    pub position: usize,
}
