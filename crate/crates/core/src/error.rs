use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unbalanced panel: missing cell (subject {subject}, time {time}, response {response})")]
    UnbalancedPanel {
        subject: String,
        time: i64,
        response: i64,
    },

    #[error("duplicate cell (subject {subject}, time {time}, response {response}) at row {row}")]
    DuplicateCell {
        subject: String,
        time: i64,
        response: i64,
        row: usize,
    },

    #[error("invalid response at row {row}: {value:?} is not 0 or 1")]
    InvalidResponse { row: usize, value: String },

    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid value at row {row}, column {column:?}: {value:?}")]
    InvalidValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("singular linearization at {context}: dF/dDelta = {derivative:e}")]
    SingularLinearization { context: String, derivative: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residuals: {trace:?})")]
    NoConvergence {
        what: String,
        iterations: usize,
        trace: Vec<f64>,
    },

    #[error("information matrix is numerically singular (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("line search failed at iteration {iteration}: log-likelihood decreased after {halvings} halvings")]
    LineSearch { iteration: usize, halvings: usize },

    #[error("random-effect scale {scale:.3} exceeds {limit:.3}, the largest the quadrature rule integrates reliably; raise the quadrature order")]
    QuadratureRange { scale: f64, limit: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("nesting violation: likelihood ratio statistic {0} is negative")]
    NestingViolation(f64),

    #[error("Monte Carlo harness failure: {failed} of {total} fits failed")]
    Harness { failed: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
