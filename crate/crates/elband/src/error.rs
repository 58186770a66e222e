use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all estimator and harness operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: kernel is {expected}-dimensional, point has dimension {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown kernel name {0:?} (expected uniform, epanechnikov or triweight)")]
    UnknownKernel(String),

    #[error("kernel dimension must be positive")]
    ZeroDimension,

    #[error("sample size must be at least 2, got {0}")]
    SampleTooSmall(usize),

    #[error("dataset columns have mismatched lengths: {y} responses vs {z} covariates")]
    LengthMismatch { y: usize, z: usize },

    #[error("covariate must be positive, got {0}")]
    NonPositiveCovariate(f64),

    #[error("cell endpoint t must be nonnegative, got {0}")]
    NegativeEndpoint(f64),

    #[error("bandwidth must lie in (0,1), got {0}")]
    InvalidBandwidth(f64),

    #[error("density value at z must be positive, got {0}")]
    NonPositiveDensity(f64),

    #[error("kernel window at z={z}, h={h} carries no mass under f_Z")]
    VanishingWindow { z: f64, h: f64 },

    #[error("empty kernel window at z={z}, h={h}: estimate undefined")]
    EmptyWindow { z: f64, h: f64 },

    #[error("convex hull condition violated: constraint weights do not take both signs")]
    HullViolated,

    #[error("all constraint weights vanish: S_n = 0")]
    DegenerateWeights,

    #[error("delta out of range: need {lo} <= delta < {hi}, got {got}")]
    InvalidDelta { lo: f64, hi: f64, got: f64 },

    #[error("critical value must lie in (0,1), got {0}")]
    InvalidCriticalValue(f64),

    #[error("no admissible theta: the kernel-weighted proportion must lie strictly in (0,1)")]
    NoAdmissibleTheta,

    #[error("no feasible bandwidth in the cross-validation grid")]
    NoFeasibleBandwidth,

    #[error("leave-one-out window empty at observation {index} (z={z}) for h={h}")]
    EmptyLooWindow { index: usize, z: f64, h: f64 },

    #[error("grid must be nonempty")]
    EmptyGrid,

    #[error("sample must be nonempty")]
    EmptySample,

    #[error("data range is zero: cannot build candidate bandwidths")]
    ZeroRange,

    #[error("function-class entry lacks a conditional mean map, required for model-mode centring")]
    MissingConditionalMean,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature failed to reach tolerance {tol} on [{a}, {b}]")]
    QuadratureDiverged { a: f64, b: f64, tol: f64 },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
