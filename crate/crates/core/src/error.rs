use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by the exit class the CLI maps them to; see
/// [`Error::class`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has nonzero mean ({mean:e} relative); periodic inverse Laplacian undefined")]
    NonZeroMean { mean: f64 },
    #[error("dyadic shell {j} is not resolvable (range {min}..={max})")]
    ShellOutOfRange { j: i32, min: i32, max: i32 },
    #[error("trajectory needs at least {needed} samples, got {got}")]
    EmptyTrajectory { needed: usize, got: usize },
    #[error("Neumann series diverges: sup |C| = {norm} >= 1")]
    Divergent { norm: f64 },
    #[error("unsupported dimension {0}; only 2 and 3 are implemented")]
    UnsupportedDimension(usize),
    #[error("flow determinant deviates from 1 by {deviation:e} (tolerance {tolerance:e})")]
    DeterminantNotUnit { deviation: f64, tolerance: f64 },
    #[error("smallness violated: {what} (measured {measured:e}, limit {limit:e})")]
    SmallnessViolated {
        what: String,
        measured: f64,
        limit: f64,
    },
    #[error("displacement {max:e} exceeds one quarter period {limit:e}")]
    DisplacementTooLarge { max: f64, limit: f64 },
    #[error("incompatible Stokes data: {0}")]
    IncompatibleData(String),
    #[error("estimate denominator vanishes")]
    ZeroData,
    #[error("inner fixed point did not converge in {iterations} iterations (last change {last:e})")]
    InnerNotConverged { iterations: usize, last: f64 },
    #[error("outer fixed point did not converge in {iterations} iterations (last change {last:e})")]
    OuterNotConverged { iterations: usize, last: f64 },
    #[error("inputs are identical; contraction factor undefined")]
    IdenticalInputs,
    #[error("time horizon collapsed below one step (T = {horizon:e}, dt = {dt:e})")]
    HorizonCollapsed { horizon: f64, dt: f64 },
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
    #[error("density contrast {contrast} exceeds the perturbative limit {limit}")]
    DensityContrastTooLarge { contrast: f64, limit: f64 },
    #[error("time {t} outside the trajectory span [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },
    #[error("io: {0}")]
    Io(String),
    #[error("malformed field dump: {0}")]
    Format(String),
}

/// Coarse error classes, one per CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Smallness,
    NonConvergence,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidGrid(_) | InvalidConfig { .. } | IncompatibleData(_) | NonZeroMean { .. } => {
                ErrorClass::Validation
            }
            SmallnessViolated { .. }
            | Divergent { .. }
            | DeterminantNotUnit { .. }
            | DisplacementTooLarge { .. }
            | DensityContrastTooLarge { .. }
            | HorizonCollapsed { .. } => ErrorClass::Smallness,
            InnerNotConverged { .. } | OuterNotConverged { .. } => ErrorClass::NonConvergence,
            _ => ErrorClass::Internal,
        }
    }

    pub(crate) fn smallness(what: impl Into<String>, measured: f64, limit: f64) -> Self {
        Error::SmallnessViolated {
            what: what.into(),
            measured,
            limit,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
