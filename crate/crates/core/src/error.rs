use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid probability space: {0}")]
    InvalidSpace(String),

    #[error("operands live on different probability spaces")]
    SpaceMismatch,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    #[error("index ({0}, {1}) outside a {2}x{3} grid")]
    IndexOutOfGrid(usize, usize, usize, usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("entry {0} is not measurable with respect to its sigma-algebra")]
    NotAdapted(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("(F4) checks disagree: probabilistic violation {probabilistic:e}, operator violation {operator:e}")]
    InconsistentF4 { probabilistic: f64, operator: f64 },

    #[error("solver did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
    NotConverged { iterations: usize, lower: f64, upper: f64 },

    #[error("norm is not differentiable away from zero: {0}")]
    NonDifferentiable(String),

    #[error("search space too large: {0}")]
    SearchTooLarge(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
