use thiserror::Error;

use crate::bases::BasesError;
use crate::field::FieldError;
use crate::geometry::GeometryError;
use crate::gl::NonConvergence;
use crate::mu::MuError;
use crate::mvb::MvbError;

/// Any error raised by the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Basis family construction or indexing.
    #[error(transparent)]
    Bases(#[from] BasesError),
    /// Simplices, complexes and solid angles.
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// Parsing or differentiating integrands.
    #[error(transparent)]
    Field(#[from] FieldError),
    /// Quadrature that failed to converge.
    #[error(transparent)]
    NonConvergence(#[from] NonConvergence),
    /// Multivariate Bernoulli evaluation.
    #[error(transparent)]
    Mvb(#[from] MvbError),
    /// Functional construction.
    #[error(transparent)]
    Mu(#[from] MuError),
    /// Invalid arguments to a numerical routine.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A numerical consistency check failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
}
