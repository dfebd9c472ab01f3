//! Parameter extraction for the CPE-R model.
//!
//! Two independent routes to (alpha, C_F, R_s):
//!   * the capacity route — log-log slope of capacity vs current at low
//!     currents gives `1 - 1/alpha`, the x-intercept of the linear plot
//!     gives `R_s = dV/(2 Ix)`, and the intercept gives `C_F`;
//!   * the impedance route — log-log slope of `|Z|` vs frequency at low
//!     frequencies gives `-alpha`, the high-frequency asymptote gives
//!     `R_s`.
//! Both use unweighted ordinary least squares in log space.

use num_complex::Complex64;
use statrs::function::gamma::{digamma, gamma};

use crate::error::{Error, Result};
use crate::fractional::CapacityPoint;

/// Capacity-vs-current dataset plus the protocol voltage window it was
/// measured over (needed to undo the resistive term).
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve {
    points: Vec<CapacityPoint>,
    delta_v: f64,
}

impl CapacityCurve {
    pub fn new(points: Vec<CapacityPoint>, delta_v: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NotEnoughData("capacity curve has no points".into()));
        }
        if !(delta_v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_v must be positive, got {delta_v}"
            )));
        }
        let mut currents: Vec<f64> = points.iter().map(|p| p.current).collect();
        currents.sort_by(f64::total_cmp);
        if currents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate currents".into()));
        }
        Ok(Self { points, delta_v })
    }

    pub fn points(&self) -> &[CapacityPoint] {
        &self.points
    }

    pub fn delta_v(&self) -> f64 {
        self.delta_v
    }

    /// Points sorted by ascending current.
    pub fn sorted_points(&self) -> Vec<CapacityPoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.current.total_cmp(&b.current));
        pts
    }

    /// Parse `i_A,q_As` CSV (one header row).
    pub fn from_csv_str(text: &str, delta_v: f64) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected i_A,q_As, got {line:?}"),
                });
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("expected a number, got {s:?}"),
                })
            };
            points.push(CapacityPoint::new(parse(fields[0])?, parse(fields[1])?)?);
        }
        Self::new(points, delta_v)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("i_A,q_As,q_Ah\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.current, p.capacity, p.amp_hours()));
        }
        out
    }
}

/// Measured or simulated impedance spectrum, ordered by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSpectrum {
    samples: Vec<(f64, Complex64)>,
}

impl ImpedanceSpectrum {
    pub fn new(samples: Vec<(f64, Complex64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NotEnoughData("spectrum has no samples".into()));
        }
        if samples[0].0 <= 0.0 {
            return Err(Error::NonPositiveFrequency(samples[0].0));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Complex64)] {
        &self.samples
    }

    /// Parse `f_Hz,re_ohm,im_ohm` CSV (one header row).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected f_Hz,re_ohm,im_ohm, got {line:?}"),
                });
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("expected a number, got {s:?}"),
                })
            };
            samples.push((
                parse(fields[0])?,
                Complex64::new(parse(fields[1])?, parse(fields[2])?),
            ));
        }
        Self::new(samples)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("f_Hz,re_ohm,im_ohm\n");
        for (f, z) in &self.samples {
            out.push_str(&format!("{},{},{}\n", f, z.re, z.im));
        }
        out
    }
}

/// Extracted CPE-R parameters with standard uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub alpha: f64,
    pub alpha_sigma: f64,
    pub c_f: f64,
    pub c_f_sigma: f64,
    pub r_s: f64,
    pub n_points_used: usize,
    /// RMS residual of the final regression, in log space.
    pub residual_rms: f64,
    /// Set when alpha lands in (1, 1.05]: kept, but flagged.
    pub alpha_overshoot: bool,
}

impl FitResult {
    /// Parenthetical last-digit notation, e.g. `0.9711(17)`.
    pub fn parenthetical(value: f64, sigma: f64) -> String {
        if sigma <= 0.0 || !sigma.is_finite() {
            return format!("{value}");
        }
        let e = sigma.log10().floor() as i32;
        let mut scaled = (sigma / 10f64.powi(e - 1)).round() as u64;
        let mut digits = 1 - e;
        if scaled >= 100 {
            scaled /= 10;
            digits -= 1;
        }
        if scaled % 10 == 0 {
            scaled /= 10;
            digits -= 1;
        }
        if digits <= 0 {
            let unit = 10f64.powi(-digits);
            return format!("{:.0}({:.0})", value, scaled as f64 * unit);
        }
        let d = digits as usize;
        format!("{value:.d$}({scaled})")
    }
}

impl std::fmt::Display for FitResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "alpha          = {}",
            Self::parenthetical(self.alpha, self.alpha_sigma)
        )?;
        writeln!(
            f,
            "c_f_AsaV       = {}",
            Self::parenthetical(self.c_f, self.c_f_sigma)
        )?;
        writeln!(f, "r_s_ohm        = {}", self.r_s)?;
        writeln!(f, "n_points_used  = {}", self.n_points_used)?;
        writeln!(f, "residual_rms   = {}", self.residual_rms)?;
        if self.alpha_overshoot {
            writeln!(f, "warning        = alpha exceeds 1 (kept, flagged)")?;
        }
        Ok(())
    }
}

struct Ols {
    slope: f64,
    intercept: f64,
    slope_var: f64,
    intercept_var: f64,
    cov: f64,
    rms: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Result<Ols> {
    let n = x.len();
    if n < 2 {
        return Err(Error::NotEnoughData(format!(
            "regression needs >= 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissa".into()));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(&xv, &yv)| (xv - x_mean) * (yv - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(&xv, &yv)| (yv - intercept - slope * xv).powi(2))
        .sum();
    let sigma2 = if n > 2 { ssr / (nf - 2.0) } else { 0.0 };
    Ok(Ols {
        slope,
        intercept,
        slope_var: sigma2 / sxx,
        intercept_var: sigma2 * (1.0 / nf + x_mean * x_mean / sxx),
        cov: -sigma2 * x_mean / sxx,
        rms: (ssr / nf).sqrt(),
    })
}

/// Default window sizes (capacity-route low points, impedance-route low
/// frequencies, and the high-current window of the R_s intercept fit).
pub const DEFAULT_CAPACITY_POINTS: usize = 4;
pub const DEFAULT_IMPEDANCE_POINTS: usize = 7;
pub const DEFAULT_RS_POINTS: usize = 4;

/// Series resistance from the x-intercept of the linear-scale capacity
/// plot: a line fitted to the `n_high_points` highest currents crosses
/// zero at `Ix`, and `R_s = dV / (2 Ix)`.
pub fn fit_rs_intercept(curve: &CapacityCurve, n_high_points: usize) -> Result<f64> {
    let pts = curve.sorted_points();
    if n_high_points < 2 || n_high_points > pts.len() {
        return Err(Error::NotEnoughData(format!(
            "need 2..={} high-current points, requested {n_high_points}",
            pts.len()
        )));
    }
    let high = &pts[pts.len() - n_high_points..];
    let x: Vec<f64> = high.iter().map(|p| p.current).collect();
    let y: Vec<f64> = high.iter().map(|p| p.capacity).collect();
    let fit = ols(&x, &y)?;
    if fit.slope >= 0.0 {
        return Err(Error::ExtrapolationInvalid(format!(
            "capacity does not decrease with current (slope {})",
            fit.slope
        )));
    }
    let i_x = -fit.intercept / fit.slope;
    let i_max = x[x.len() - 1];
    if i_x <= i_max {
        return Err(Error::ExtrapolationInvalid(format!(
            "x-intercept {i_x} A does not exceed the highest measured current {i_max} A"
        )));
    }
    Ok(curve.delta_v() / (2.0 * i_x))
}

/// Capacity-route fit using an `r_s` value supplied by the caller.
///
/// The resistive term is removed point-wise before the log-log
/// regression (each capacity is divided by
/// `[1 - 2 I r_s/dV]^(1/alpha)`, iterating since alpha itself comes from
/// the corrected slope), so for noiseless closed-form data the fit is
/// exact. Pass `r_s = 0` for the plain power-law fit.
pub fn fit_capacity_curve_with_rs(
    curve: &CapacityCurve,
    n_low_points: usize,
    r_s: f64,
) -> Result<FitResult> {
    let pts = curve.sorted_points();
    if n_low_points < 2 || n_low_points > pts.len() {
        return Err(Error::NotEnoughData(format!(
            "need 2..={} low-current points, requested {n_low_points}",
            pts.len()
        )));
    }
    let dv = curve.delta_v();
    let low = &pts[..n_low_points];
    if low.iter().any(|p| p.capacity <= 0.0) {
        return Err(Error::NonPhysicalCurve("zero capacity in fit window".into()));
    }
    for p in low {
        if 2.0 * p.current * r_s >= dv {
            return Err(Error::ResistiveWindowExhausted {
                resistive_drop: 2.0 * p.current * r_s,
                delta_v: dv,
                i_x: dv / (2.0 * r_s),
            });
        }
    }
    let x: Vec<f64> = low.iter().map(|p| p.current.ln()).collect();
    let y0: Vec<f64> = low.iter().map(|p| p.capacity.ln()).collect();

    let alpha_from_slope = |slope: f64| -> Result<f64> {
        let s = if slope.abs() < 1e-12 { 0.0 } else { slope };
        if s > 0.0 {
            return Err(Error::NonPhysicalCurve(format!(
                "capacity increases with current (log-log slope {s})"
            )));
        }
        if s >= 1.0 {
            return Err(Error::NonPhysicalCurve(format!("log-log slope {s} >= 1")));
        }
        let alpha = 1.0 / (1.0 - s);
        if alpha > 1.05 {
            return Err(Error::NonPhysicalCurve(format!(
                "fitted alpha {alpha} exceeds 1.05"
            )));
        }
        Ok(alpha)
    };

    let mut fit = ols(&x, &y0)?;
    let mut alpha = alpha_from_slope(fit.slope)?;
    if r_s > 0.0 {
        for _ in 0..50 {
            let y: Vec<f64> = low
                .iter()
                .zip(&y0)
                .map(|(p, &ly)| ly - (1.0 - 2.0 * p.current * r_s / dv).ln() / alpha)
                .collect();
            fit = ols(&x, &y)?;
            let next = alpha_from_slope(fit.slope)?;
            let done = (next - alpha).abs() < 1e-14;
            alpha = next;
            if done {
                break;
            }
        }
    }

    // Invert the closed-form capacity at the 1 A intercept of the
    // corrected line (the resistive term is already divided out, so the
    // plain dV applies): ln C_F = alpha*b + ln(3 - 2^alpha)
    //                              - ln Gamma(alpha+1) - ln dV.
    let b = fit.intercept;
    let c_f = (alpha * b).exp() * (3.0 - 2f64.powf(alpha)) / (gamma(alpha + 1.0) * dv);

    // Delta-method uncertainties from the (slope, intercept) covariance.
    let alpha_sigma = alpha * alpha * fit.slope_var.sqrt();
    let dlncf_dalpha =
        b - 2f64.powf(alpha) * std::f64::consts::LN_2 / (3.0 - 2f64.powf(alpha))
            - digamma(alpha + 1.0);
    let dlncf_ds = dlncf_dalpha * alpha * alpha; // d(alpha)/d(slope) = alpha^2
    let dlncf_db = alpha;
    let var_lncf = dlncf_ds * dlncf_ds * fit.slope_var
        + dlncf_db * dlncf_db * fit.intercept_var
        + 2.0 * dlncf_ds * dlncf_db * fit.cov;
    let c_f_sigma = c_f * var_lncf.max(0.0).sqrt();

    Ok(FitResult {
        alpha,
        alpha_sigma,
        c_f,
        c_f_sigma,
        r_s,
        n_points_used: n_low_points,
        residual_rms: fit.rms,
        alpha_overshoot: alpha > 1.0,
    })
}

/// Full capacity-route fit: `R_s` is estimated first from the x-intercept
/// of the high-current points (falling back to zero when the curve has no
/// usable intercept, e.g. a pure capacitor), then (alpha, C_F) from the
/// corrected low-current fit.
pub fn fit_capacity_curve(curve: &CapacityCurve, n_low_points: usize) -> Result<FitResult> {
    let n_high = DEFAULT_RS_POINTS.min(curve.points().len());
    let r_s = match fit_rs_intercept(curve, n_high) {
        Ok(r_s) => r_s,
        Err(Error::ExtrapolationInvalid(_)) => 0.0,
        Err(e) => return Err(e),
    };
    fit_capacity_curve_with_rs(curve, n_low_points, r_s)
}

/// Impedance-route fit: the mean `|Z|` over the `n_high_freqs` highest
/// frequencies estimates the `R_s` asymptote, which is subtracted before
/// the log-log slope fit of `|Z - R_s|` over the `n_low_freqs` lowest
/// frequencies gives alpha and C_F.
pub fn fit_impedance_spectrum(
    spectrum: &ImpedanceSpectrum,
    n_low_freqs: usize,
    n_high_freqs: usize,
) -> Result<FitResult> {
    let samples = spectrum.samples();
    if n_low_freqs < 2 || n_high_freqs < 1 {
        return Err(Error::NotEnoughData(
            "need >= 2 low-frequency and >= 1 high-frequency points".into(),
        ));
    }
    if n_low_freqs > samples.len() || n_high_freqs > samples.len() {
        return Err(Error::NotEnoughData(format!(
            "spectrum has {} samples, windows request {} low + {} high",
            samples.len(),
            n_low_freqs,
            n_high_freqs
        )));
    }
    let r_s = samples[samples.len() - n_high_freqs..]
        .iter()
        .map(|(_, z)| z.norm())
        .sum::<f64>()
        / n_high_freqs as f64;

    let low = &samples[..n_low_freqs];
    let x: Vec<f64> = low.iter().map(|(f, _)| f.ln()).collect();
    let mut y = Vec::with_capacity(n_low_freqs);
    for (f, z) in low {
        let m = (z - r_s).norm();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NonPhysicalCurve(format!(
                "|Z - R_s| vanishes at {f} Hz; R_s asymptote estimate {r_s} ohm"
            )));
        }
        y.push(m.ln());
    }
    let fit = ols(&x, &y)?;
    let alpha = -fit.slope;
    if alpha <= 1e-9 {
        return Err(Error::NonPhysicalCurve(format!(
            "|Z| is not a decreasing power law (slope {}); R_s asymptote estimate {r_s} ohm",
            fit.slope
        )));
    }
    if alpha > 1.05 {
        return Err(Error::NonPhysicalCurve(format!(
            "fitted alpha {alpha} exceeds 1.05"
        )));
    }

    // ln C_F = -b - alpha ln(2 pi), with alpha = -slope.
    let ln_2pi = std::f64::consts::TAU.ln();
    let c_f = (-fit.intercept - alpha * ln_2pi).exp();
    let var_lncf =
        ln_2pi * ln_2pi * fit.slope_var + fit.intercept_var + 2.0 * ln_2pi * fit.cov * -1.0;
    let c_f_sigma = c_f * var_lncf.max(0.0).sqrt();

    Ok(FitResult {
        alpha,
        alpha_sigma: fit.slope_var.sqrt(),
        c_f,
        c_f_sigma,
        r_s,
        n_points_used: n_low_freqs,
        residual_rms: fit.rms,
        alpha_overshoot: alpha > 1.0,
    })
}

/// Agreement metrics between the two extraction routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValidation {
    /// |alpha_cap - alpha_imp| in units of the combined standard
    /// uncertainty (infinite when both sigmas are zero and values differ).
    pub alpha_diff_sigma: f64,
    /// (r_s_cap - r_s_imp) / r_s_imp.
    pub r_s_rel_diff: f64,
    /// c_f_cap / c_f_imp; expected below 1 for real cells.
    pub c_f_ratio: f64,
}

pub fn cross_validate(cap_fit: &FitResult, imp_fit: &FitResult) -> CrossValidation {
    let combined = (cap_fit.alpha_sigma.powi(2) + imp_fit.alpha_sigma.powi(2)).sqrt();
    let diff = (cap_fit.alpha - imp_fit.alpha).abs();
    let alpha_diff_sigma = if diff == 0.0 {
        0.0
    } else if combined == 0.0 {
        f64::INFINITY
    } else {
        diff / combined
    };
    CrossValidation {
        alpha_diff_sigma,
        r_s_rel_diff: (cap_fit.r_s - imp_fit.r_s) / imp_fit.r_s,
        c_f_ratio: cap_fit.c_f / imp_fit.c_f,
    }
}

impl std::fmt::Display for CrossValidation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "alpha_diff_sigma = {}", self.alpha_diff_sigma)?;
        writeln!(f, "r_s_rel_diff     = {}", self.r_s_rel_diff)?;
        writeln!(f, "c_f_ratio        = {}", self.c_f_ratio)
    }
}
