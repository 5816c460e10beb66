use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid bounds: x_min={x_min}, x_max={x_max}, n_points={n_points} (need x_min < x_max and n_points >= 16)")]
    InvalidBounds {
        x_min: f64,
        x_max: f64,
        n_points: usize,
    },
    #[error("density has zero or negative mass ({0})")]
    ZeroMass(f64),
    #[error("density is not normalized: mass = {0}")]
    NotNormalized(f64),
    #[error("density value {value} at node {index} is below the negativity tolerance")]
    Negative { index: usize, value: f64 },
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("densities live on different grids")]
    GridMismatch,
    #[error("reference operator limited to {max} points, grid has {got}")]
    GridTooLarge { max: usize, got: usize },
    #[error("epsilon = {epsilon} is under-resolved by grid spacing {spacing} (need epsilon >= 4 spacing)")]
    UnderResolved { epsilon: f64, spacing: f64 },
    #[error("trait value {x} outside tabulated range [{lo}, {hi}]")]
    OutOfTable { x: f64, lo: f64, hi: f64 },
    #[error("requested moment order {requested} exceeds stored order {stored}")]
    OrderExceeded { requested: usize, stored: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("rate fit requires positive values; field `{field}` has {value} at epsilon {epsilon}")]
    NonPositiveValues {
        field: String,
        epsilon: f64,
        value: f64,
    },
    #[error("selection-average decomposition mismatch: direct {direct}, decomposed {decomposed}")]
    DecompositionMismatch { direct: f64, decomposed: f64 },
    #[error("blow-up: value {value} at t = {t}")]
    BlowUp { t: f64, value: f64 },
    #[error("negativity violation at t = {t}: min/max = {ratio}")]
    NegativityViolation { t: f64, ratio: f64 },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
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
