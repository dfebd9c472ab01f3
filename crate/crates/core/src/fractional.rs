//! Closed-form math for the CPE-R model.
//!
//! A constant-phase element (CPE) relates current and voltage through a
//! fractional derivative of order `alpha`; its impedance is
//! `1/(C_F (jw)^alpha)` and its voltage response to a piecewise-constant
//! current drive has an exact power-law superposition form. Everything in
//! this module is a pure function; SI units throughout (A, V, s, ohm).

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// The fractional pair (alpha, C_F) defining a constant-phase element.
///
/// `c_f` carries units A·s^alpha·V^-1 and reduces to an ordinary
/// capacitance at alpha = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpeParams {
    pub alpha: f64,
    pub c_f: f64,
}

impl CpeParams {
    pub fn new(alpha: f64, c_f: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1], got {alpha}"
            )));
        }
        if !(c_f > 0.0) || !c_f.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "c_f must be positive, got {c_f}"
            )));
        }
        Ok(Self { alpha, c_f })
    }
}

/// CPE in series with a resistor (the CPE-R equivalent circuit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitModel {
    pub cpe: CpeParams,
    pub r_s: f64,
}

impl CircuitModel {
    pub fn new(cpe: CpeParams, r_s: f64) -> Result<Self> {
        if !(r_s >= 0.0) || !r_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "r_s must be non-negative, got {r_s}"
            )));
        }
        Ok(Self { cpe, r_s })
    }
}

/// Piecewise-constant current drive: each `(start_time, current)` segment
/// holds until the next start time. The element is fully relaxed before
/// the first segment, which must start at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCurrentProfile {
    segments: Vec<(f64, f64)>,
}

impl StepCurrentProfile {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("profile has no segments".into()));
        }
        if segments[0].0 != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "first segment must start at t = 0, got {}",
                segments[0].0
            )));
        }
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "segment start times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if segments.iter().any(|(t, i)| !t.is_finite() || !i.is_finite()) {
            return Err(Error::InvalidParameter("non-finite segment".into()));
        }
        Ok(Self { segments })
    }

    /// Constant current starting at t = 0.
    pub fn constant(current: f64) -> Self {
        Self {
            segments: vec![(0.0, current)],
        }
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn current_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map_or(0.0, |(_, i)| *i)
    }

    /// The same profile with every current multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|&(t, i)| (t, i * factor)).collect(),
        }
    }
}

/// Constant-current cycling window: magnitude `i0` between voltage limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleProtocol {
    pub i0: f64,
    pub v_h: f64,
    pub v_l: f64,
}

impl CycleProtocol {
    pub fn new(i0: f64, v_h: f64, v_l: f64) -> Result<Self> {
        if !(i0 > 0.0) || !i0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "i0 must be positive, got {i0}"
            )));
        }
        if !(v_h > v_l) {
            return Err(Error::InvalidParameter(format!(
                "v_h ({v_h}) must exceed v_l ({v_l})"
            )));
        }
        Ok(Self { i0, v_h, v_l })
    }

    pub fn delta_v(&self) -> f64 {
        self.v_h - self.v_l
    }
}

/// One point of a capacity-vs-current curve. Capacity is stored in A·s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPoint {
    pub current: f64,
    pub capacity: f64,
}

impl CapacityPoint {
    pub fn new(current: f64, capacity: f64) -> Result<Self> {
        if !(current > 0.0) || !current.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "current must be positive, got {current}"
            )));
        }
        if !(capacity >= 0.0) || !capacity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "capacity must be non-negative, got {capacity}"
            )));
        }
        Ok(Self { current, capacity })
    }

    /// Capacity in ampere-hours (presentation only; internals stay in A·s).
    pub fn amp_hours(&self) -> f64 {
        self.capacity / 3600.0
    }
}

fn check_frequency(frequency: f64) -> Result<()> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::NonPositiveFrequency(frequency));
    }
    Ok(())
}

/// CPE impedance `Z = 1/(C_F (jw)^alpha)` with `w = 2*pi*frequency`.
///
/// The phase of the result is exactly `-alpha*pi/2` for every frequency.
pub fn cpe_impedance(cpe: &CpeParams, frequency: f64) -> Result<Complex64> {
    check_frequency(frequency)?;
    let jw = Complex64::new(0.0, std::f64::consts::TAU * frequency);
    Ok((jw.powf(cpe.alpha) * cpe.c_f).inv())
}

/// Impedance of the full CPE-R model: `r_s + Z_cpe`.
pub fn model_impedance(model: &CircuitModel, frequency: f64) -> Result<Complex64> {
    Ok(cpe_impedance(&model.cpe, frequency)? + model.r_s)
}

/// Riemann-Liouville voltage of a CPE under a piecewise-constant drive.
///
/// For current steps `dI_k` at times `t_k` the fractional integral
/// collapses to the exact superposition
/// `V(t) = sum_k dI_k (t - t_k)^alpha / (C_F Gamma(alpha+1))`,
/// so no quadrature is involved. The element is relaxed at t = 0.
pub fn rl_voltage(cpe: &CpeParams, profile: &StepCurrentProfile, t: f64) -> Result<f64> {
    let start = profile.segments()[0].0;
    if t < start {
        return Err(Error::TimeBeforeProfile { t, start });
    }
    let norm = cpe.c_f * gamma(cpe.alpha + 1.0);
    let mut prev_current = 0.0;
    let mut v = 0.0;
    for &(t_k, i_k) in profile.segments() {
        if t_k > t {
            break;
        }
        let delta_i = i_k - prev_current;
        v += delta_i * (t - t_k).powf(cpe.alpha);
        prev_current = i_k;
    }
    Ok(v / norm)
}

/// Total discharge voltage swing for the symmetric charge-then-discharge
/// drive (charge at `i0` for `t_charge` seconds, then discharge at `-i0`
/// for the same duration):
/// `dV = (3 - 2^alpha) i0 T^alpha / (C_F Gamma(alpha+1)) + 2 i0 r_s`.
pub fn cycle_voltage_swing(model: &CircuitModel, i0: f64, t_charge: f64) -> Result<f64> {
    if !(i0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "i0 must be positive, got {i0}"
        )));
    }
    if !(t_charge > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_charge must be positive, got {t_charge}"
        )));
    }
    let a = model.cpe.alpha;
    let cpe_term =
        (3.0 - 2f64.powf(a)) * i0 * t_charge.powf(a) / (model.cpe.c_f * gamma(a + 1.0));
    Ok(cpe_term + 2.0 * i0 * model.r_s)
}

/// Closed-form capacity of a symmetric constant-current cycle:
/// `Q = [C_F Gamma(alpha+1)/(3 - 2^alpha) (dV - 2 i0 r_s)]^(1/alpha) i0^(1 - 1/alpha)`.
///
/// Fails with `ResistiveWindowExhausted` when the whole voltage window is
/// consumed by the series resistor; the error reports the x-intercept
/// current `Ix = dV/(2 r_s)` at which capacity reaches zero.
pub fn analytic_capacity(model: &CircuitModel, protocol: &CycleProtocol) -> Result<CapacityPoint> {
    let delta_v = protocol.delta_v();
    let resistive_drop = 2.0 * protocol.i0 * model.r_s;
    if resistive_drop >= delta_v {
        return Err(Error::ResistiveWindowExhausted {
            resistive_drop,
            delta_v,
            i_x: delta_v / (2.0 * model.r_s),
        });
    }
    let a = model.cpe.alpha;
    let base = model.cpe.c_f * gamma(a + 1.0) / (3.0 - 2f64.powf(a)) * (delta_v - resistive_drop);
    let q = base.powf(1.0 / a) * protocol.i0.powf(1.0 - 1.0 / a);
    CapacityPoint::new(protocol.i0, q)
}

/// Peukert exponent equivalent to the CPE model: `n = 1/alpha`.
pub fn peukert_exponent(cpe: &CpeParams) -> f64 {
    1.0 / cpe.alpha
}
