use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains non-finite entries or is not square")]
    InvalidMatrix,
    #[error("symmetric eigensolver did not converge")]
    DecompositionFailure,
    #[error("decomposition is stale: built at iteration {stamp}, state is at iteration {current}")]
    StaleDecomposition { stamp: u64, current: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("invalid population size {0}")]
    InvalidPopulationSize(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{requested} injected slots requested but population size is {lambda}")]
    TooManyInjections { requested: usize, lambda: usize },
    #[error("more than one mean-shift request in a single generation")]
    DuplicateMeanShift,
    #[error("injection payload is not finite or has the wrong length")]
    InvalidInjection,
    #[error("injected direction must be non-zero")]
    InvalidDirection,
    #[error("fitness value at index {0} is NaN")]
    InvalidFitness(usize),
    #[error("generation does not belong to the current iteration")]
    ForeignGeneration,
    #[error("update produced a non-finite or non-positive state")]
    NonFiniteState,
    #[error("cannot freeze all {0} variables")]
    AllVariablesFrozen(usize),
    #[error("length history is inconsistent with the iteration count")]
    InconsistentHistory,
    #[error("problem has no known optimum")]
    NoKnownOptimum,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
