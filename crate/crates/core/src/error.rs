use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Variants are grouped by the subsystem that produces them; [`Error::exit_code`]
/// maps each group onto the process exit code used by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline degree {0}: must be at least 1")]
    InvalidDegree(usize),
    #[error("invalid grid size {0}: must be at least 1 interval")]
    InvalidGrid(usize),
    #[error("degenerate domain [{0}, {1}]")]
    DegenerateDomain(f64, f64),
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("malformed model document: {0}")]
    MalformedDocument(String),
    #[error("model document version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unsupported scheme {family} with {steps} steps")]
    UnsupportedScheme { family: String, steps: usize },
    #[error("unsupported finite-difference order {0}")]
    UnsupportedOrder(usize),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("zero polynomial")]
    ZeroPolynomial,

    #[error("zero diagonal at row {0}")]
    ZeroDiagonal(usize),
    #[error("singular matrix (sigma_min / sigma_max = {0:e})")]
    SingularMatrix(f64),

    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite or diverged at iteration {iteration} (loss = {loss:e})")]
    NonFiniteLoss { iteration: usize, loss: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("invalid time grid: {0}")]
    InvalidGridSpec(String),

    #[error("invalid Hölder parameters: {0}")]
    InvalidHolderParams(String),
    #[error("empty input")]
    EmptyInput,

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for this error class.
    ///
    /// | code | class |
    /// |------|-------|
    /// | 2 | invalid arguments or configuration |
    /// | 3 | I/O |
    /// | 4 | malformed input files (model, trajectory, config) |
    /// | 5 | numerical failure in discovery or linear algebra |
    /// | 6 | training divergence |
    /// | 7 | integration failure |
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidDegree(_)
            | InvalidGrid(_)
            | DegenerateDomain(..)
            | InvalidDimension(_)
            | UnsupportedScheme { .. }
            | UnsupportedOrder(_)
            | InvalidConfig(_)
            | InvalidHolderParams(_)
            | InvalidGridSpec(_)
            | UnknownExperiment(_) => 2,
            Io(_) => 3,
            MalformedDocument(_) | VersionMismatch { .. } | Csv(_) | Parse(_) => 4,
            NonFiniteInput(_)
            | TooFewSamples { .. }
            | DegenerateFit(_)
            | ZeroPolynomial
            | ZeroDiagonal(_)
            | SingularMatrix(_)
            | EmptyInput => 5,
            NonFiniteLoss { .. } => 6,
            StepSizeUnderflow { .. } | NonFiniteState(_) => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
