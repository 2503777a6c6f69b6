use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid grid function: {0}")]
    GridFunction(String),

    #[error("not a valid cumulative function: {0}")]
    InvalidCdf(String),

    #[error("tangent norm {norm:.6} outside the admissible ball (must be < {limit:.6})")]
    OutsideBall { norm: f64, limit: f64 },

    #[error("invalid density: {0}")]
    Density(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular local regression design after {retries} bandwidth widenings")]
    SingularDesign { retries: usize },

    #[error("query point outside the predictor data range: {0}")]
    QueryOutsideRange(String),
}
