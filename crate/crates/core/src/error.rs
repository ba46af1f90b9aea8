use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("potential is not integrable: {0}")]
    NonIntegrable(String),

    #[error("matrix is not symmetric positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} is closer than {margin:.3e} to the domain boundary")]
    BoundaryMargin { point: Vec<f64>, margin: f64 },

    #[error("zero probability mass at k = {0}")]
    ZeroMass(usize),

    #[error("negative probability {value} at k = {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("empty support")]
    EmptySupport,

    #[error("quadrature did not converge within {max_subdiv} subdivisions (error {error:.3e})")]
    BudgetExhausted { max_subdiv: usize, error: f64 },

    #[error("non-finite value at {0:?}")]
    NonFinite(Vec<f64>),

    #[error("test function fails its monotonicity requirement: {0}")]
    NotIncreasing(String),

    #[error("test functions are not comonotone: {0}")]
    NotComonotone(String),

    #[error("potential Hessian is singular at {0:?}")]
    SingularHessian(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
