use thiserror::Error;

/// Which half of a K-P split an element was expected to live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    K,
    P,
}

impl std::fmt::Display for Subspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subspace::K => f.write_str("K (block-diagonal)"),
            Subspace::P => f.write_str("P (block-anti-diagonal)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not anti-Hermitian (residual {residual:.3e})")]
    NotAntiHermitian { residual: f64 },

    #[error("matrix is not traceless (|tr| = {residual:.3e})")]
    NotTraceless { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("matrix is not special (|det - 1| = {residual:.3e})")]
    NotSpecial { residual: f64 },

    #[error("invalid AIII decomposition (n = {n}, q = {q}); need 1 <= q <= n - q")]
    InvalidDecomposition { n: usize, q: usize },

    #[error("element does not lie in {subspace} (residual {residual:.3e})")]
    NotInSubspace { subspace: Subspace, residual: f64 },

    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("singular disc point (r^2 = {r2})")]
    SingularPoint { r2: f64 },

    #[error("lift undefined on the singular fiber (|z| = 1, w = 0)")]
    SingularFiber,

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("initial group point projects {distance:.3e} away from the curve start")]
    InitialPointMismatch { distance: f64 },

    #[error("regular witness construction failed after {attempts} seeds")]
    WitnessConstruction { attempts: u32 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::WitnessConstruction { .. } | Error::Numerical(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
