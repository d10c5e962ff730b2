//! Error type shared by all modules of the crate.

use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("a system needs at least one subsystem")]
    EmptySystem,

    #[error("subsystem {level} is not Hurwitz: spectral abscissa {abscissa:.6e} >= 0")]
    Unstable { level: usize, abscissa: f64 },

    #[error("matrix is not Hurwitz: spectral abscissa {abscissa:.6e} >= 0")]
    NotHurwitz { abscissa: f64 },

    #[error("shift {shift} at level {level} makes the resolvent singular")]
    SingularShift { level: usize, shift: Complex64 },

    #[error("matrix is not symmetric: relative defect {defect:.3e}")]
    NotSymmetric { defect: f64 },

    #[error("matrix is significantly indefinite: min eigenvalue {min_eig:.3e}, scale {scale:.3e}")]
    Indefinite { min_eig: f64, scale: f64 },

    #[error("requested order {requested} exceeds numerical rank {rank} at subsystem {level}")]
    RankExceeded {
        level: usize,
        requested: usize,
        rank: usize,
    },

    #[error("quadrature grid collision at level {level}: |lambda| = {lambda:.6e} vs |mu| = {mu:.6e}")]
    GridCollision { level: usize, lambda: f64, mu: f64 },

    #[error("node count {gamma} at level {level} must be even and >= 2")]
    BadNodeCount { level: usize, gamma: usize },

    #[error("invalid frequency range [{lo:.6e}, {hi:.6e}]: need 0 < lo <= hi")]
    BadRange { lo: f64, hi: f64 },

    #[error("quadrature nodes must be ascending and positive")]
    UnsortedNodes,

    #[error("grid is not conjugate-symmetric at level {level}")]
    AsymmetricGrid { level: usize },

    #[error("{count} requested samples are missing, first: ({first})")]
    MissingSamples { count: usize, first: String },

    #[error("time grids differ: {0}")]
    TimeGridMismatch(String),

    #[error("state diverged at t = {t:.6}")]
    Divergence { t: f64 },

    #[error("unknown input signal '{0}'")]
    UnknownInput(String),

    #[error("invalid input expression: {0}")]
    BadExpression(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
