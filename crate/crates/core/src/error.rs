//! Crate-wide error type.
//!
//! Solvers fail loudly: anything that would silently degrade an answer
//! (overflowing exponents, exhausted step control, unconverged iterations)
//! is an error carrying enough context to diagnose the run.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction rejected the inputs (bad stoichiometry, empty domain,
    /// non-convex polygon, invalid mesh, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// No scaled lattice point lies in the domain closure.
    #[error("empty grid: no lattice point with spacing {h} lies in the domain closure")]
    EmptyGrid { h: f64 },

    /// The requested line misses the domain closure entirely.
    #[error("no intersection: the line x0 + beta*nu_perp + alpha*nu misses the domain closure")]
    NoIntersection,

    /// Gauss-Seidel/Newton iteration for an implicit Euler step stalled.
    #[error(
        "resolvent did not converge: residual {residual:.3e} after {iterations} sweeps \
         (tolerance {tolerance:.3e})"
    )]
    NoConvergence {
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },

    /// A difference quotient `(u_k - u_i)/h` left the range where `exp` is
    /// meaningful; the solver state has diverged. Never saturated silently.
    #[error("exponent overflow: |{exponent:.6e}| > 700 in exp((u_k - u_i)/h)")]
    ExponentOverflow { exponent: f64 },

    /// Adaptive step control shrank the step below the hard floor.
    #[error("time step underflow at t = {t:.6e}: required dt {dt:.3e} < floor {floor:.3e}")]
    StepTooSmall { t: f64, dt: f64, floor: f64 },

    /// Positivity-preserving halving exhausted its budget while integrating
    /// the master equation.
    #[error("time step too large: positivity halving exhausted at t = {t:.6e} (dt = {dt:.3e})")]
    StepTooLarge { t: f64, dt: f64 },

    /// A caller-fixed time step violates the stability bound of the
    /// finite-difference scheme.
    #[error("CFL violation: requested dt = {dt:.3e} exceeds the stability bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },

    /// Matched-grid comparison requires equal point counts.
    #[error("size mismatch: {left} vs {right} grid points")]
    SizeMismatch { left: usize, right: usize },

    /// The concentration exponent cannot be distinguished from DP resolution.
    #[error("degenerate rate: beta = {beta:.3e} is not above the DP resolution {resolution:.3e}")]
    DegenerateRate { beta: f64, resolution: f64 },

    /// No lattice start point near the requested one satisfies the offset
    /// decomposition hypotheses.
    #[error("no admissible start near ({x:.6}, {y:.6}) at h = {h}: {detail}")]
    NoAdmissibleStart {
        x: f64,
        y: f64,
        h: f64,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
