use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("unsupported input in `{field}`: {message}")]
    Unsupported { field: String, message: String },

    #[error("piece count mismatch: {kernels} kernels need {expected} boundaries, found {boundaries}")]
    PieceCountMismatch { kernels: usize, boundaries: usize, expected: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular diagonal: K_n(t,t) = 0 at t = {t}")]
    SingularDiagonal { t: f64 },

    #[error("no valid constants: |A(0)| = {a0} and epsilon bound = {eps_bound}")]
    NoValidConstants { a0: f64, eps_bound: f64 },

    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),

    #[error("derivative of t^0·ln^{k} t leaves the log-power representation")]
    NonPolynomialDerivative { k: u32 },

    #[error("degenerate characteristic function at j = {j}: first {cap} derivatives vanish")]
    DegenerateCharacteristic { j: u32, cap: u32 },

    #[error("multiplicity mismatch: {0}")]
    MultiplicityMismatch(String),

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("missing parameter binding for `{0}`")]
    MissingParameter(String),

    #[error("parameter set mismatch: {0}")]
    ParameterMismatch(String),

    #[error("not covered: {0}")]
    NotCovered(String),

    #[error("the first-interval bound A(0) < 1 is not certified on a nonempty first interval (h1 = {h1})")]
    ConditionNotCertified { h1: f64 },

    #[error("contraction failure on [{start}, {end}]: measured ratio {ratio:.4} after {iterations} iterations")]
    ContractionFailure { start: f64, end: f64, ratio: f64, iterations: usize },

    #[error("step ordering violated: alpha(t) = {alpha} at t = {t} lies beyond history end {history_end}; try a smaller epsilon")]
    StepOrdering { t: f64, alpha: f64, history_end: f64 },

    #[error("no weight l <= {l_max} makes the correction operator contractive (q = {q}, q1 = {q1})")]
    WeightExhausted { l_max: f64, q: f64, q1: f64 },

    #[error("asymptotic residual too large for the correction: {0}")]
    HypothesisViolated(String),
}
