use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exceptional point at eps = {eps}: eigenvector basis is ill-conditioned (|discriminant| = {discriminant:e})")]
    ExceptionalPoint { eps: f64, discriminant: f64 },

    #[error("no grid node falls inside the ellipse (a = {a}, b = {b})")]
    DegenerateGrid { a: f64, b: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("no sample qualifies as interior")]
    EmptyCloud,

    #[error("total weight is zero")]
    ZeroWeight,

    #[error("covariance is isotropic (srr = {srr}, sri = {sri}, sii = {sii}); orientation undefined")]
    IsotropicCovariance { srr: f64, sri: f64, sii: f64 },

    #[error("window has zero span on the {axis} axis")]
    DegenerateWindow { axis: &'static str },

    #[error("probability vector does not sum to one (sum = {sum}) or has negative entries")]
    NotNormalized { sum: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: unsupported format version {found}")]
    Version { path: PathBuf, found: String },

    #[error("{path}: expected {expected} data rows, found {found}")]
    ShapeMismatch { path: PathBuf, expected: usize, found: usize },

    #[error("anchor calibration failed: {0}")]
    Anchor(Box<Error>),

    #[error("sweep failed: {failed} of {total} points failed (budget 10%)")]
    SweepBudget { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
