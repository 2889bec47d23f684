use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("facet {facet}: normal {normal:?} is not primitive")]
    NonPrimitiveNormal { facet: usize, normal: Vec<i64> },
    #[error("facet {facet}: offset {offset} must be >= 1 so that 0 is interior")]
    NonPositiveOffset { facet: usize, offset: i64 },
    #[error("facet {facet}: normal has length {got}, expected {expected}")]
    DimensionMismatch {
        facet: usize,
        expected: usize,
        got: usize,
    },
    #[error("need dim >= 1 and at least dim + 1 facets (dim = {dim}, facets = {facets})")]
    TooFewFacets { dim: usize, facets: usize },
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("vertex {point:?} is tight on {tight} facets, expected {dim}")]
    NonSimpleVertex {
        point: Vec<String>,
        tight: usize,
        dim: usize,
    },
    #[error("vertex {point:?} is not a lattice point")]
    NonIntegralVertex { point: Vec<String> },
    #[error("facet {facet} does not support a facet of the polytope")]
    RedundantFacet { facet: usize },
    #[error("polarizing vector {xi:?} is orthogonal to an edge generator")]
    DegeneratePolarization { xi: Vec<i64> },
    #[error("vertex system for facets {facets:?} is singular")]
    SingularVertexSystem { facets: Vec<usize> },
    #[error("point {point:?} lies outside {scale}*P (facet {facet} violated)")]
    PointOutside {
        point: Vec<i64>,
        scale: i64,
        facet: usize,
    },
    #[error("variable mismatch: {0}")]
    VariableMismatch(String),
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("quadrature tolerance not met: value {value:e}, error estimate {estimate:e}")]
    ToleranceNotMet { value: f64, estimate: f64 },
    #[error("polytope is not regular (an edge cone is not unimodular)")]
    NotRegular,
    #[error("Ehrhart interpolation disagrees with the lattice sum at N = {n}")]
    FitMismatch { n: u64 },
    #[error("slow convergence: successive differences {differences:?} do not shrink by 1.5x")]
    SlowConvergence { differences: Vec<f64> },
    #[error("ill-conditioned ladder fit: exponents {first} and {second} nearly collide (condition number {condition:e})")]
    IllConditionedFit {
        first: f64,
        second: f64,
        condition: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    /// Coarse classification used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NotRegular | Error::DegeneratePolarization { .. } => ErrorCategory::Precondition,
            Error::ToleranceNotMet { .. }
            | Error::SlowConvergence { .. }
            | Error::IllConditionedFit { .. }
            | Error::FitMismatch { .. } => ErrorCategory::Numerical,
            _ => ErrorCategory::Input,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Precondition,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
