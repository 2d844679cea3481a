use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel {index} outside grid range {first}..={last}")]
    ChannelOutOfRange { index: i32, first: i32, last: i32 },

    #[error("frequency {ghz} GHz is not on the grid (nearest channel {nearest})")]
    OffGrid { ghz: f64, nearest: i32 },

    #[error("{quantity} must be positive and finite, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },

    #[error("wavelength {nm} nm outside model validity range {min_nm}..{max_nm} nm")]
    WavelengthOutOfRange { nm: f64, min_nm: f64, max_nm: f64 },

    #[error("geometry is inconsistent: {0}")]
    Consistency(String),

    #[error("K(T) has no sign change in {low_c}..{high_c} °C")]
    NoPhaseMatch { low_c: f64, high_c: f64 },

    #[error(
        "pumps unbalanced: relative mismatch {relative:.3e} exceeds {tolerance:.3e}; \
         use propagate_analytic, which has no balance requirement"
    )]
    Unbalanced { relative: f64, tolerance: f64 },

    #[error("δK·L = {delta_k_l} violates the admissibility bound for branch m = {m}")]
    OutOfRegime { delta_k_l: f64, m: u32 },

    #[error("integration failed at z = {z} m: step size {step} underflowed")]
    IntegrationFailure { z: f64, step: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("requested efficiency {requested} exceeds the attainable maximum {eta_max}")]
    Infeasible { requested: f64, eta_max: f64 },

    #[error("planning error: {0}")]
    Planning(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("ratio undefined: accidental rate is zero")]
    UndefinedRatio,

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
