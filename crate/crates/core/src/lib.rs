//! Fractional-order battery model: a constant-phase element in series
//! with a resistor, together with everything needed to use it in
//! practice — closed-form charge/discharge analysis, synthesis of an
//! equivalent RC ladder for time-domain simulation, a cycling simulator,
//! and parameter extraction from capacity curves or impedance spectra.

pub mod error;
pub mod fitting;
pub mod fractional;
pub mod morrison;
pub mod simulator;

pub use error::{Error, Result};
pub use fitting::{
    cross_validate, fit_capacity_curve, fit_capacity_curve_with_rs, fit_impedance_spectrum,
    fit_rs_intercept, CapacityCurve, CrossValidation, FitResult, ImpedanceSpectrum,
};
pub use fractional::{
    analytic_capacity, cpe_impedance, cycle_voltage_swing, model_impedance, peukert_exponent,
    rl_voltage, CapacityPoint, CircuitModel, CpeParams, CycleProtocol, StepCurrentProfile,
};
pub use morrison::{
    approximation_report, log_grid, network_impedance, required_n_half, synthesize,
    ApproximationRow, Branch, MorrisonNetwork, MorrisonSpec,
};
pub use simulator::{
    capacity_sweep, run_cycles, CycleResult, DtPolicy, SimState, SweepResult, TraceSample,
};
