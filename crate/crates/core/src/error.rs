use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("expected a horizontal point, vertical coordinate is {0}")]
    NotHorizontal(f64),

    #[error("vectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("vectors are not symplectically isotropic (|omega| = {0:e})")]
    NotIsotropic(f64),

    #[error("too many horizontal vectors: {count} > n = {n}")]
    TooManyVectors { count: usize, n: usize },

    #[error("subgroups do not form a semidirect split (stacked basis singular, |det| = {0:e})")]
    SingularSplit(f64),

    #[error("point is not in the subgroup (residual {0:e})")]
    NotInSubgroup(f64),

    #[error("grade mismatch: {0} vs {1}")]
    GradeMismatch(usize, usize),

    #[error("blade factors are linearly dependent")]
    DependentFactors,

    #[error("unsupported blade grade {grade} in ambient dimension {dim}")]
    UnsupportedGrade { grade: usize, dim: usize },

    #[error("degenerate Jacobian with respect to V: {0:e}")]
    DegenerateJacobian(f64),

    #[error("rank-deficient differential: horizontal Jacobian {0:e}")]
    RankDeficient(f64),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("query leaves the parameter domain U: {0}")]
    DomainExit(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distance failed validation: {0}")]
    InvalidDistance(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}
