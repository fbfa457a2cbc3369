//! Error type shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("lattice size must be at least 4, got {0}")]
    LatticeTooSmall(usize),
    #[error("perturbation carries mode {mode:?} beyond the alias-free band limit {limit}")]
    AliasedPerturbation { mode: [i32; 2], limit: i32 },
    #[error("perturbation has no Fourier representation")]
    NotFourier,
    #[error("perturbation has no grid representation")]
    NotGrid,
    #[error("grid perturbation has {got} samples, expected {expected}")]
    GridShape { got: usize, expected: usize },
    #[error("non-invertible base Dirac operator: mass {0} is an integer (kernel at n = {1})")]
    IntegerDiracMass(f64, i64),
    #[error("geometry {0} not supported by this operation")]
    WrongGeometry(&'static str),
    #[error("operator is numerically singular: smallest |eigenvalue| = {min_abs:.3e}")]
    NearSingular { min_abs: f64 },
    #[error("eigenvalue solver failed to converge (n = {n}, max |entry| = {scale:.3e})")]
    EigenSolver { n: usize, scale: f64 },
    #[error("eigenvalue {eig} lies within {dist:.3e} rad of the spectral cut ray at angle {angle}")]
    CutViolation { eig: Complex64, angle: f64, dist: f64 },
    #[error("spectrum is not contained in the right half-plane (offender {eig}); heat-kernel representation invalid")]
    LeftHalfPlaneSpectrum { eig: Complex64 },
    #[error("heat-coefficient fit residual {residual:.3e} above threshold {threshold:.3e}; increase N or shrink fit window")]
    HeatFitResidual { residual: f64, threshold: f64 },
    #[error("fit window [{lo:.3e}, {hi:.3e}] is too narrow; increase the cutoff N")]
    FitWindowTooNarrow { lo: f64, hi: f64 },
    #[error("series route invalid; use product route (spectral radius {rho:.3e} >= 1)")]
    SeriesDiverges { rho: f64 },
    #[error("determinant routes disagree: {a} vs {b} (relative {rel:.3e}); eigenvalue solver is suspect")]
    RouteDisagreement { a: Complex64, b: Complex64, rel: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("sample grid spans {decades:.2} decades, need at least {need:.1}; widen the grid")]
    SpanTooNarrow { decades: f64, need: f64 },
    #[error("design matrix condition {cond:.3e} exceeds 1e10; widen the sample span")]
    IllConditionedFit { cond: f64 },
    #[error("matrix is not positive definite: pivot {index} is {value:.3e}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("ODE step size underflow at x = {x:.6} (step {h:.3e})")]
    OdeStepUnderflow { x: f64, h: f64 },
    #[error("partition function divergent for this V, eps: min eigenvalue {min_eig:.4} <= -0.95")]
    PartitionDivergent { min_eig: f64 },
    #[error("grid field must have zero mean, got mean {0:.3e}")]
    MeanNotZero(f64),
    #[error("finite-difference evaluation point {t:?} leaves the cut-admissible region")]
    NonAdmissiblePoint { t: Vec<f64> },
    #[error("hadamard tail bound {bound:.3e} exceeds tol {tol:.3e}; store more zeros")]
    TailBoundExceedsTol { bound: f64, tol: f64 },
    #[error("need at least {need} zeros for exponent estimation, got {got}")]
    TooFewZeros { need: usize, got: usize },
    #[error("|f| overflowed or vanished on every ray; retry with smaller radii")]
    OrderGridUnusable,
    #[error("polynomial fit residual {residual:.3e} exceeds tolerance {tol:.3e} at max degree {degree}")]
    FactorizationResidual { residual: f64, tol: f64, degree: usize, profile: Vec<f64> },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
