//! Error type shared across the crate.

use alloc::vec::Vec;
use core::fmt;

/// Everything that can go wrong when building or evaluating a Mondrian
/// random forest.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Covariate dimension must be at least one.
    ZeroDimension,
    /// Lifetime parameters must be nonnegative (strictly positive for fits).
    InvalidLifetime(f64),
    /// Forests need at least one tree.
    ZeroForestSize,
    /// Training sets need at least one observation.
    EmptyTrainingSet,
    /// Covariate and response lengths disagree.
    LengthMismatch { x_rows: usize, y_len: usize },
    /// A training covariate fell outside the unit cube.
    CovariateOutOfRange { row: usize, dim: usize, value: f64 },
    /// A query point fell outside the unit cube.
    PointOutOfDomain { dim: usize, value: f64 },
    /// Query dimension does not match the tree or forest.
    DimensionMismatch { expected: usize, got: usize },
    /// Tree sampling exceeded the node budget; the lifetime is too large
    /// for this dimension.
    NodeBudgetExceeded { lifetime: f64, dim: usize, max_nodes: usize },
    /// Forests combined into one ensemble must share a lifetime.
    MixedLifetimes { expected: f64, got: f64 },
    /// Debiasing scales must be distinct for the Vandermonde system to be
    /// nonsingular; names the offending pair.
    DuplicateScale { first: usize, second: usize, value: f64 },
    /// Debiasing scales must be strictly positive.
    NonPositiveScale { index: usize, value: f64 },
    /// The base debiasing scale is pinned to one.
    BaseScaleNotOne(f64),
    /// Debiasing orders above five make the scale ladder numerically
    /// fragile and are rejected.
    OrderTooLarge { order: usize, max: usize },
    /// Robust tuning needs a debiasing order of at least one.
    OrderTooSmall { order: usize, min: usize },
    /// Confidence level must lie strictly inside (0, 1).
    InvalidAlpha(f64),
    /// Quantile argument must lie strictly inside (0, 1).
    InvalidProbability(f64),
    /// The polynomial design matrix is numerically rank deficient.
    CollinearDesign { pivot: usize, ratio: f64 },
    /// Too few observations for the requested polynomial order.
    InsufficientSamples { needed: usize, got: usize },
    /// The AIMSE numerator vanished; the criterion has no interior minimum.
    DegenerateCriterion,
    /// GCV denominator is nonpositive: the lambda grid exceeds the
    /// effective-sample bound `abar^d lambda^d < n`.
    GcvEffectiveSampleBound { effective: f64, n: usize },
    /// A required even derivative entry is missing from the tensor.
    MissingDerivative(Vec<usize>),
    /// The lambda grid for cross-validation was empty.
    EmptyGrid,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroDimension => write!(f, "dimension must be at least 1"),
            Error::InvalidLifetime(l) => write!(f, "invalid lifetime {l}"),
            Error::ZeroForestSize => write!(f, "forest size must be at least 1"),
            Error::EmptyTrainingSet => write!(f, "training set is empty"),
            Error::LengthMismatch { x_rows, y_len } => {
                write!(f, "covariates have {x_rows} rows but responses have length {y_len}")
            }
            Error::CovariateOutOfRange { row, dim, value } => write!(
                f,
                "covariate {value} at row {row}, dimension {dim} is outside [0,1]; \
                 rescale covariates to the unit cube (min-max) before fitting"
            ),
            Error::PointOutOfDomain { dim, value } => {
                write!(f, "query coordinate {value} in dimension {dim} is outside [0,1]")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "expected a point of dimension {expected}, got {got}")
            }
            Error::NodeBudgetExceeded { lifetime, dim, max_nodes } => write!(
                f,
                "tree at lifetime {lifetime} in dimension {dim} exceeded {max_nodes} nodes"
            ),
            Error::MixedLifetimes { expected, got } => {
                write!(f, "trees must share one lifetime: expected {expected}, got {got}")
            }
            Error::DuplicateScale { first, second, value } => write!(
                f,
                "debiasing scales a[{first}] and a[{second}] are both {value}; \
                 the Vandermonde system is singular"
            ),
            Error::NonPositiveScale { index, value } => {
                write!(f, "debiasing scale a[{index}] = {value} must be positive")
            }
            Error::BaseScaleNotOne(v) => write!(f, "base debiasing scale must be 1, got {v}"),
            Error::OrderTooLarge { order, max } => {
                write!(f, "debiasing order {order} exceeds the supported maximum {max}")
            }
            Error::OrderTooSmall { order, min } => {
                write!(f, "debiasing order {order} is below the required minimum {min}")
            }
            Error::InvalidAlpha(a) => write!(f, "confidence level {a} must be in (0,1)"),
            Error::InvalidProbability(p) => write!(f, "probability {p} must be in (0,1)"),
            Error::CollinearDesign { pivot, ratio } => write!(
                f,
                "polynomial design is rank deficient at column {pivot} \
                 (pivot ratio {ratio:e}); consider GCV for lifetime selection instead"
            ),
            Error::InsufficientSamples { needed, got } => {
                write!(f, "need more than {needed} observations for this fit, got {got}")
            }
            Error::DegenerateCriterion => write!(
                f,
                "estimated derivatives vanish; the AIMSE criterion has no interior minimum"
            ),
            Error::GcvEffectiveSampleBound { effective, n } => write!(
                f,
                "GCV requires abar^d * lambda^d < n, got {effective} >= {n}; \
                 the lambda grid exceeds the effective-sample bound"
            ),
            Error::MissingDerivative(nu) => {
                write!(f, "derivative tensor is missing the entry for multi-index {nu:?}")
            }
            Error::EmptyGrid => write!(f, "lambda grid is empty"),
        }
    }
}

impl core::error::Error for Error {}
