//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "quadrature did not converge in {context}: achieved {achieved:.3e}, required {required:.3e}"
    )]
    QuadratureNonConvergence {
        context: String,
        achieved: f64,
        required: f64,
    },

    #[error(
        "stationary signal: |dp/dt| integrates to {z:.3e}; the time-of-flow density is undefined"
    )]
    StationarySignal { z: f64 },

    #[error("empty signal: p(t) integrates to {z:.3e}; the stroboscopic density is undefined")]
    EmptySignal { z: f64 },

    #[error("signal negativity {min:.3e} exceeds the quadrature-noise threshold {threshold:.3e}")]
    ExcessNegativity { min: f64, threshold: f64 },

    #[error("non-positive spectral curvature at L = {l}: the Gaussian saddle breaks down past L_c = {l_c}; use the above-barrier regime machinery")]
    NonPositiveCurvature { l: f64, l_c: f64 },

    #[error("no tunneling regime: k0 = {k0} is not below the barrier wavenumber k_b = {k_b}")]
    NoTunnelingRegime { k0: f64, k_b: f64 },

    #[error("degenerate or plateau maximum of the filtered spectrum: {0}")]
    DegenerateMaximum(String),

    #[error("grid resolution violated: {0}")]
    GridResolution(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
