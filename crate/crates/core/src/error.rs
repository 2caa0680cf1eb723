use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree law: {0}")]
    InvalidLaw(String),
    #[error("unequal means: E[D-] = {mean_in}, E[D+] = {mean_out}")]
    UnequalMeans { mean_in: f64, mean_out: f64 },
    #[error("truncation tail too heavy: mass deficit {deficit:e} exceeds tolerance {tolerance:e}")]
    TailNotConvergent { deficit: f64, tolerance: f64 },
    #[error("mean in-degree is zero")]
    ZeroMean,
    #[error("empty support")]
    EmptySupport,
    #[error("incompatible period: n = {n} cannot satisfy the balance condition for period {period}")]
    IncompatiblePeriod { n: usize, period: u64 },
    #[error("rejection budget exhausted after {attempts} attempts (acceptance rate {rate:.3e})")]
    AttemptsExhausted { attempts: usize, rate: f64 },
    #[error("unbalanced degree sequence: in-total {total_in}, out-total {total_out}")]
    Unbalanced { total_in: u64, total_out: u64 },
    #[error("probability {value} outside [0, 1] in {context}")]
    ProbabilityOutOfRange { value: f64, context: String },
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
    #[error("discovery stream exhausted")]
    StreamExhausted,
    #[error("mark at {mark} lies beyond the path end {len}")]
    MarkBeyondPath { mark: usize, len: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("size cap exceeded: {vertices} vertices / {edges} edges (cap {max_vertices} / {max_edges})")]
    SizeCap {
        vertices: usize,
        edges: usize,
        max_vertices: usize,
        max_edges: usize,
    },
    #[error("grid too coarse: intensity * dt = {0} > 0.5")]
    GridTooCoarse(f64),
    #[error("singular matrix")]
    Singular,
    #[error("degenerate support: differences span fewer than 2 dimensions")]
    Degenerate,
    #[error("window overflow: support needs {needed} cells, window has {window}")]
    WindowOverflow { needed: usize, window: usize },
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("zero probability normalizer")]
    ZeroNormalizer,
    #[error("Monte Carlo budget too small: {0}")]
    BudgetTooSmall(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
