use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("field strength must be non-negative and finite, got {0}")]
    NegativeField(f64),
    #[error("unknown nuclear species `{0}` (expected H2+ or D2+)")]
    UnknownSpecies(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid trial parameters: {0}")]
    InvalidParameters(String),
    #[error("trial function is not normalizable (norm = {norm:e})")]
    NotNormalizable { norm: f64 },
    #[error("quadrature did not converge: estimated relative error {achieved:e} > target {target:e}")]
    QuadratureNotConverged { achieved: f64, target: f64 },
    #[error("no interior minimum of E(R) in bracket [{lo}, {hi}] bohr")]
    NoInteriorMinimum { lo: f64, hi: f64 },
    #[error("least-squares system is rank deficient ({0})")]
    RankDeficient(String),
    #[error("ill-conditioned fit: condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("sampling step {step} is too coarse (need <= {max})")]
    InsufficientResolution { step: f64, max: f64 },
    #[error("point (R = {r}, theta = {theta}) lies outside the tabulated grid")]
    Extrapolation { r: f64, theta: f64 },
    #[error("eigenvalue bracketing failed for level {level}: {reason}")]
    Bracketing { level: usize, reason: &'static str },
    #[error("radial grid too short: wavefunction tail {tail:e} at boundary for v = {level}")]
    GridTooShort { level: usize, tail: f64 },
    #[error("surface node (R = {r}, theta = {theta}) failed: {reason}")]
    NodeFailed { r: f64, theta: f64, reason: String },
    #[error("surface unusable: {count} node(s) failed in the well region, first at (R = {r}, theta = {theta})")]
    SurfaceUnusable { count: usize, r: f64, theta: f64 },
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error("eigensolver failed to converge in block M = {m}, parity = {parity}")]
    Eigensolver { m: i32, parity: i32 },
}

pub type Result<T> = core::result::Result<T, Error>;
