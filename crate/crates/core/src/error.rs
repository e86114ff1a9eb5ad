use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, violated precondition, unsupported size.
    Precondition,
    /// Iteration failure, overflow, NaN.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("symmetric eigensolver did not converge on side {side} (residual {residual:e})")]
    EigenNonConvergence { side: usize, residual: f64 },

    #[error("matrix exponential overflow: largest eigenvalue {lambda_max} exceeds cap {cap}")]
    ExpOverflow { lambda_max: f64, cap: f64 },

    #[error("point outside polytope: inequality {row} has slack {slack} at point {col}")]
    PointOutside { row: usize, col: usize, slack: i64 },

    #[error("integer overflow while evaluating {0}")]
    IntegerOverflow(&'static str),

    #[error("{what} too large: {value} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("inconsistent factorization: {0}")]
    Inconsistent(String),

    #[error("minimum-volume ellipsoid did not converge after {iterations} iterations (gap {gap:e})")]
    MveeNonConvergence { iterations: usize, gap: f64 },

    #[error(
        "rescaling transform condition number {condition:e} exceeds bound {bound:e}; \
         every transform with non-increasing potential must stay below tau/sigma^2"
    )]
    ConditionBlowup { condition: f64, bound: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::EigenNonConvergence { .. }
            | Error::ExpOverflow { .. }
            | Error::IntegerOverflow(_)
            | Error::MveeNonConvergence { .. }
            | Error::ConditionBlowup { .. }
            | Error::Numeric(_)
            | Error::NonFinite(_) => ErrorClass::Numeric,
            _ => ErrorClass::Precondition,
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
