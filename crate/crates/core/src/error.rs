use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("speed ordering violated: {0}")]
    OrderingViolated(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry: {0}")]
    NonFiniteEntry(String),
    #[error("position {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("adaptive quadrature did not converge within depth {0}")]
    QuadratureNonConvergent(usize),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("boundary matrix is not in class B (minor of order {0} is singular)")]
    NotInClassB(usize),
    #[error("CFL condition violated after {0} time-step halvings")]
    CflViolation(usize),
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("boundary closure failed at t = {t}: {reason}")]
    BoundaryClosureFailure { t: f64, reason: String },
    #[error(
        "boundary speed of component {0} at x = 0 is too small to solve the dual boundary relation"
    )]
    SingularBoundarySpeed(usize),
    #[error("characteristic left the domain at t = {0}")]
    FlowLeftDomain(f64),
    #[error("coupling has a non-zero diagonal entry C[{0}][{0}]; apply the diagonal gauge first")]
    DiagonalCouplingPresent(usize),
    #[error("kernel fixed-point iteration diverged after {0} iterations")]
    FixedPointDivergence(usize),
    #[error("kernel fixed-point iteration did not reach tolerance in {0} iterations")]
    MaxItersExceeded(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("target time {t} does not exceed the optimal time {t_opt}")]
    TimeTooShort { t: f64, t_opt: f64 },
    #[error("initial data violates the compatibility conditions: {0}")]
    CompatibilityViolated(String),
    #[error("least-squares system ill-conditioned (estimate {0:e})")]
    IllConditionedSystem(f64),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("singular matrix")]
    SingularMatrix,
    #[error("expression error: {0}")]
    Expression(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OrderingViolated(_)
                | Error::DimensionMismatch(_)
                | Error::NonFiniteEntry(_)
                | Error::OutOfDomain(_)
                | Error::IndexOutOfRange { .. }
                | Error::NotInClassB(_)
                | Error::DiagonalCouplingPresent(_)
                | Error::GridMismatch(_)
                | Error::TimeTooShort { .. }
                | Error::CompatibilityViolated(_)
                | Error::NotApplicable(_)
                | Error::Expression(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
