use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration failed validation before any computation ran.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Adaptive quadrature ran out of subdivisions. The best estimate is kept.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error estimate {error_estimate:e})"
    )]
    QuadratureDiverged {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    /// Tail statistics requested so far out that the tail probability underflows.
    #[error("tail probability underflows at x_max = {x_max} (cutoff {cutoff} sigma)")]
    TailUnderflow { x_max: f64, cutoff: f64 },

    #[error("singular normal-equation matrix on segment [{lo}, {hi}]")]
    SingularSystem { lo: f64, hi: f64 },

    #[error("spline/knot mismatch: {0}")]
    KnotMismatch(String),

    #[error("segment {segment}: no real root for target {target}")]
    NoRealRoot { segment: usize, target: f64 },

    #[error("segment {segment}: no root of target {target} inside [{lo}, {hi}]")]
    NoRootInDomain {
        segment: usize,
        target: f64,
        lo: f64,
        hi: f64,
    },

    /// Both roots landed in the segment, so the segment is not monotone there.
    #[error("segment {segment}: two roots of target {target} inside the segment")]
    AmbiguousRoot { segment: usize, target: f64 },

    #[error("spline is not strictly increasing on segment {segment} (h'({x}) = {slope})")]
    NonMonotone { segment: usize, x: f64, slope: f64 },

    /// A point of the compressed-domain grid is not reachable by the spline.
    #[error("compressed target {target} lies outside the spline range [{lo}, {hi}]")]
    UnreachableTarget { target: f64, lo: f64, hi: f64 },

    #[error("cell index {index} out of range (quantizer has {cells} cells)")]
    IndexOutOfRange { index: usize, cells: usize },

    #[error("every sweep candidate produced an invalid design")]
    AllCandidatesInvalid,

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// Lloyd–Max distortion went up between two iterations.
    #[error("distortion increased from {previous:e} to {current:e} at iteration {iteration}")]
    DistortionIncreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },
}
