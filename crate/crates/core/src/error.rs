use thiserror::Error;

/// Errors produced by the registration library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegError {
    /// A frame's linear part is too close to singular to be inverted.
    #[error("singular frame: |det(a)| = {det:e} is below the floor {floor:e}")]
    SingularFrame { det: f64, floor: f64 },

    /// A frame contains NaN or infinite entries.
    #[error("frame has non-finite entries")]
    NonFiniteFrame,

    /// Total inlier mass collapsed; the M-step has nothing to fit.
    #[error("degenerate responsibilities: N_p = {n_p:e} is below the minimum {min:e}")]
    DegenerateResponsibility { n_p: f64, min: f64 },

    /// A linear system that should be positive definite failed to factor.
    #[error("linear system could not be solved: {0}")]
    SingularSystem(String),

    /// A point set was empty where at least one frame is required.
    #[error("{0} set is empty")]
    EmptySet(&'static str),

    /// Shapes of inputs disagree (posterior size vs. set sizes, etc).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, RegError>;
