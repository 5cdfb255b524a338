//! Error types shared across the crate.

use thiserror::Error;

/// Errors from kernel analytics (quadrature, tabulation, index estimation).
#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel profile is negative at rho = {rho}: nu(rho) = {value}")]
    NonPositiveProfile { rho: f64, value: f64 },
    #[error("adaptive quadrature exhausted its budget without a convergence or divergence verdict ({context})")]
    QuadratureFailure { context: String },
    #[error("tail integral does not converge; the kernel violates the p-integrability condition")]
    DivergentTail,
    #[error("w(2s) underflows at s = {s}; doubling ratio undefined")]
    TailVanishes { s: f64 },
    #[error("profile is nonpositive at sampled radius {rho}")]
    NonPositiveSample { rho: f64 },
    #[error("more than {percent:.0}% of the integral mass comes from the extrapolated region")]
    ExtrapolationDominated { percent: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid radial tabulation: {0}")]
    InvalidTable(String),
}

/// Errors from grid functions, cell masses and seminorm evaluation.
#[derive(Debug, Error)]
pub enum DiscretizationError {
    #[error("grid geometries do not match: {0}")]
    GeometryMismatch(String),
    #[error("origin cell mass failed to stabilize to {target:.1e} relative (reached {reached:.1e})")]
    SingularCellBudget { target: f64, reached: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid i/o failed: {0}")]
    Io(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Errors from the Hardy machinery.
#[derive(Debug, Error)]
pub enum HardyError {
    #[error("doubling constant beta = {beta} is outside (1, 2)")]
    BetaOutOfRange { beta: f64 },
    #[error("t = {t} is below the smallest tabulated w value and extrapolation is disabled")]
    OutOfRange { t: f64 },
    #[error("function is supported outside the slab 0 < x_d < {a}")]
    SupportViolation { a: f64 },
    #[error("estimated lower Matuszewska index {index} is <= {bound}; embedding hypothesis fails")]
    IndexTooLow { index: f64, bound: f64 },
    #[error("delta(s) = {delta} exceeds s/2 = {half} at s = {s}")]
    DeltaBound { s: f64, delta: f64, half: f64 },
    #[error("annulus mass identity off by {relerr:.3e} (tolerance {tol:.1e}) at s = {s}")]
    MassIdentity { s: f64, relerr: f64, tol: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

/// Errors from capacity computation and its derived checks.
#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("optimizer exhausted {iters} iterations with relative change {relchange:.3e} > 1e-6")]
    NoConvergence { iters: usize, relchange: f64 },
    #[error("mask comes within {dist} of the box boundary (required clearance {required})")]
    MaskTouchesBoundary { dist: f64, required: f64 },
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("coarea check requires a nonnegative function (min value {min})")]
    NegativeFunction { min: f64 },
    #[error("ball estimate sweep violated its ratio window: {0}")]
    SweepWindow(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}
