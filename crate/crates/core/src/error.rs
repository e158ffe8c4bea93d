use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite field: entry {index} is {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grids do not match")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too coarse: sigma0 = {sigma0} must exceed 3*dx = {limit}")]
    GridTooCoarse { sigma0: f64, limit: f64 },
    #[error("domain too narrow: 4*sigma0 = {extent} must be below the half-width {half_width}")]
    DomainTooNarrow { extent: f64, half_width: f64 },
    #[error("time step too large: kinetic phase per step dt*hbar*k_max^2/(2m) = {phase} must be below pi")]
    TimeStepTooLarge { phase: f64 },
    #[error("negative density {value} at index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("density not normalized: measured norm {norm}")]
    NotNormalized { norm: f64 },
    #[error("bin width {bin_width} does not tile the grid: {reason}")]
    InvalidBinWidth { bin_width: f64, reason: String },
    #[error("phase not unwrappable: density support above the floor is disconnected")]
    PhaseNotUnwrappable,
    #[error("time series error: {0}")]
    Series(String),
    #[error("packet reached the domain boundary: seam density {density:e}")]
    SeamDensity { density: f64 },
}
