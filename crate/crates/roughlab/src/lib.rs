//! A numerical laboratory for level-2 rough paths and fast-slow systems.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! fast dynamics ──> Birkhoff / iterated sums ──> rough-path lifts ──> RDE
//!      (drivers)            (drivers)               (lifts)          (rde)
//!                                                      │
//!                    Σ / Γ estimators  <───────────────┘
//!                      (estimators)
//!                          │
//!            fast-slow vs. limit-SDE law comparison
//!                      (homogenize)
//! ```
//!
//! * [`rough`] — the step-2 group `G = R^m ⊕ (R^m ⊗ R^m)`, increments,
//!   p-variation and Hölder norms.
//! * [`lifts`] — canonical Stratonovich / Itô lifts, Brownian rough paths
//!   with area drift, pure-area paths.
//! * [`rde`] — step-2 Euler (Davie) RDE solver and an Euler–Maruyama
//!   SDE solver for the corrected limit equations.
//! * [`drivers`] — chaotic interval maps, random walks and OU physical
//!   Brownian motion behind a common registry, selected by name.
//! * [`estimators`] — limit covariance Σ, area drift Γ, moment-scaling and
//!   tightness diagnostics, distributional tests.
//! * [`homogenize`] — fast-slow runs and law comparisons against the
//!   Γ-corrected limit SDE.
//! * [`mc`] — splittable RNG streams, compensated reductions, jackknife.

pub mod drivers;
pub mod estimators;
pub mod homogenize;
pub mod lifts;
pub(crate) mod linalg;
pub mod mc;
pub mod rde;
pub mod rough;

/// Default relative tolerance for algebraic identities (group laws, Chen
/// relation, symmetry defects). Checks accept an explicit tolerance where a
/// caller needs a different one.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Errors surfaced by fallible operations across the crate.
///
/// Contract violations that indicate a programming error (e.g. mixing
/// increments of different dimension) panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid is not strictly increasing in [0,1] with endpoints 0 and 1")]
    InvalidGrid,

    #[error("grids do not match; resample onto a common grid first")]
    GridMismatch,

    #[error("covariance matrix is not symmetric positive semidefinite")]
    NotPsd,

    #[error("friction matrix spectrum must have positive real part (min Re λ = {0})")]
    SpectrumCheck(f64),

    #[error("state blew up at t = {time} (|y| > {bound})")]
    BlowUp { time: f64, bound: f64 },

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("unknown {kind} '{name}'; known: {known}")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("zero variance sample")]
    ZeroVariance,

    #[error("sample sizes must match and be >= {min}")]
    SampleSize { min: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
