use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (defect {defect:.3e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("sum of the matrices is zero")]
    RankZero,

    #[error("matrix {index} has rank zero")]
    RankDeficient { index: usize },

    #[error("{what} is numerically singular")]
    NumericallySingular { what: &'static str },

    #[error("trailing block is singular")]
    SingularTrailingBlock,

    #[error("Schur complement is singular")]
    SingularSchurComplement,

    #[error("linear system is inconsistent (residual {residual:.3e})")]
    InconsistentSystem { residual: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("P(x, lambda) is not positive definite at x = {x:?}, sample {lambda} (eigenvalue {eigenvalue:.3e})")]
    PositivityViolation {
        x: Vec<f64>,
        lambda: usize,
        eigenvalue: f64,
    },

    #[error("coordinate {index} is negative ({value})")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("coordinate {index} must be strictly positive ({value})")]
    NonPositiveCoordinate { index: usize, value: f64 },

    #[error("parameter sample {index} out of range ({count} samples)")]
    UnknownSample { index: usize, count: usize },

    #[error("Neumann series may diverge (ratio {ratio:.3e} >= 1)")]
    DivergenceRisk { ratio: f64 },

    #[error("flag condition violated between matrices {index} and {} (defect {defect:.3e})", index + 1)]
    FlagConditionViolated { index: usize, defect: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid test curve: {0}")]
    InvalidCurve(String),

    #[error("Omega^t Delta != Delta Omega (defect {defect:.3e})")]
    NotSymmetricUnderDelta { defect: f64 },

    #[error("Delta Im(Omega) is not positive definite (eigenvalue {min_eigenvalue:.3e})")]
    ImaginaryPartNotPositive { min_eigenvalue: f64 },

    #[error("Im of the period matrix is not positive definite (eigenvalue {min_eigenvalue:.3e})")]
    DegenerateImaginaryPart { min_eigenvalue: f64 },

    #[error("invalid polarization type: {0}")]
    InvalidPolarization(String),

    #[error("integrality violated: {0}")]
    Integrality(String),

    #[error("point outside the polydisk: {0}")]
    OutsidePolydisk(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
