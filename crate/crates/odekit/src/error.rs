//! One error type for the whole crate.

use thiserror::Error;

use crate::expr::Symbol;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(Symbol),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no antiderivative in the toolkit table for: {0}")]
    UnsupportedIntegral(String),
    #[error("zero polynomial has no well-defined roots")]
    ZeroPolynomial,
    #[error("root iteration failed to converge")]
    RootsNotConverged,
    #[error(
        "rational function is not proper (numerator degree {num} >= denominator degree {den})"
    )]
    ImproperRational { num: usize, den: usize },
    #[error("equation does not match any supported first-order class")]
    Unclassified,
    #[error("differential form is not exact")]
    NotExact,
    #[error("supplied particular solution fails its residual check (max residual {0:e})")]
    BadParticular(f64),
    #[error("candidate basis is linearly dependent on the working interval (min |W| = {0:e})")]
    DependentBasis(f64),
    #[error("known solution vanishes on the working interval")]
    VanishingKnownSolution,
    #[error("forcing term has no rational transform image: {0}")]
    NonRationalForcing(String),
    #[error("initial conditions must be given at x = 0")]
    IcNotAtOrigin,
    #[error("unsupported forcing shape: {0}")]
    UnsupportedForcing(String),
    #[error("coefficient matching produced an unsolvable system")]
    MatchingFailed,
    #[error("non-finite state at step {0}")]
    NonFinite(usize),
    #[error("step count {0} exceeds the 10^7 limit")]
    TooManySteps(u64),
    #[error("abscissa {0} does not lie on the trajectory grid")]
    OffGrid(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
