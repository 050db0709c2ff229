use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("density has zero (or non-positive) mass")]
    AllZero,
    #[error("negative density value {value:e} at node {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("densities live on different grids")]
    GridMismatch,
    #[error("grid with {n_points} nodes exceeds the quadrature limit of {limit}")]
    TooLarge { n_points: usize, limit: usize },
    #[error("selection mass ∫a·n vanishes")]
    ZeroSelectionMass,
    #[error("selection function cannot be applied analytically to an atomic measure")]
    UnsupportedSelection,
    #[error("means differ: {0:e} vs {1:e}")]
    MeansDiffer(f64, f64),
    #[error("degenerate pair: W2 = {0:e}")]
    DegeneratePair(f64),
    #[error("explicit Euler step lost {clamped:e} mass to negative clamping")]
    StepUnstable { clamped: f64 },
    #[error("{value} lies outside the safe range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("ODE solution diverged at t = {t}: Y = {y}")]
    Diverged { t: f64, y: f64 },
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("trajectories are not aligned: {0}")]
    Misaligned(String),
    #[error("malformed density table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
