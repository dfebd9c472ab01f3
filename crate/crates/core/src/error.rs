use thiserror::Error;

/// Errors produced by model construction, synthesis, simulation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency must be positive and finite, got {0}")]
    NonPositiveFrequency(f64),

    #[error("time {t} s precedes the profile start at {start} s")]
    TimeBeforeProfile { t: f64, start: f64 },

    #[error(
        "resistive window exhausted: 2*I0*Rs = {resistive_drop} V >= dV = {delta_v} V \
         (capacity reaches zero at Ix = {i_x} A)"
    )]
    ResistiveWindowExhausted {
        resistive_drop: f64,
        delta_v: f64,
        i_x: f64,
    },

    #[error("insufficient branches: band requires n_half >= {required}, got {given}")]
    InsufficientBranches { required: usize, given: usize },

    #[error("degenerate: use ideal capacitor (alpha = 1 has no RC-ladder realization)")]
    DegenerateAlphaOne,

    #[error("unstable time step: dt = {dt} s exceeds 0.5*tau_min = {limit} s")]
    UnstableTimeStep { dt: f64, limit: f64 },

    #[error("non-physical curve: {0}")]
    NonPhysicalCurve(String),

    #[error("extrapolation invalid: {0}")]
    ExtrapolationInvalid(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
