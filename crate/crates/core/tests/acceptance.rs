//! Acceptance gate: one test per acceptance criterion, each printing a
//! single PASS line with the measured figures. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` for a
//! readable report.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use fracbat::{
    analytic_capacity, approximation_report, capacity_sweep, cpe_impedance, cross_validate,
    fit_capacity_curve_with_rs, fit_impedance_spectrum, fit_rs_intercept, log_grid, rl_voltage,
    simulator::step, synthesize, CapacityCurve, CapacityPoint, CircuitModel, CpeParams,
    CycleProtocol, DtPolicy, ImpedanceSpectrum, MorrisonNetwork, MorrisonSpec, SimState,
    StepCurrentProfile, SweepResult,
};

const ALPHA: f64 = 0.9711;
const C_F: f64 = 9203.0;
const R_S: f64 = 0.0631;
const V_H: f64 = 4.30;
const V_L: f64 = 3.00;
const DELTA_V: f64 = 1.3;
const MEASUREMENT_BAND: (f64, f64) = (5e-7, 2.0);
const CURRENTS: [f64; 7] = [5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05];

fn target() -> CpeParams {
    CpeParams::new(ALPHA, C_F).unwrap()
}

/// Ladder whose band is centered on the reference center time constant
/// R_0 C_0 = 725 * 110 s (tau_min ~ 3.3 s, so dt ~ 0.8 s).
fn reference_net() -> MorrisonNetwork {
    let spec = MorrisonSpec::new(target(), 30, 1.4).unwrap();
    let f0 = 1.0 / (std::f64::consts::TAU * 725.0 * 110.0);
    synthesize(&spec, (f0 / 1e3, f0 * 1e3)).unwrap()
}

/// Simulated capacity sweep shared by criteria 3 and 6.
fn shared_sweep() -> &'static SweepResult {
    static SWEEP: OnceLock<SweepResult> = OnceLock::new();
    SWEEP.get_or_init(|| {
        capacity_sweep(
            &reference_net(),
            R_S,
            V_H,
            V_L,
            &CURRENTS,
            2,
            DtPolicy::FromTauMin,
        )
        .unwrap()
    })
}

#[test]
fn criterion_1_network_tracks_cpe_across_the_band() {
    // A few branches beyond the minimum keep the band edges clean.
    let n_half = fracbat::required_n_half(MEASUREMENT_BAND, 1.4) + 7;
    let spec = MorrisonSpec::new(target(), n_half, 1.4).unwrap();
    let net = synthesize(&spec, MEASUREMENT_BAND).unwrap();
    let rows = approximation_report(&net, MEASUREMENT_BAND, 61).unwrap();
    let (worst_mag, worst_phase) = rows.iter().fold((0.0f64, 0.0f64), |(m, p), r| {
        (m.max(r.mag_err_pct.abs()), p.max(r.phase_err_deg.abs()))
    });
    assert!(worst_mag < 5.0, "worst |Z| error {worst_mag} %");
    assert!(worst_phase < 1.0, "worst phase error {worst_phase} deg");
    println!(
        "criterion 1: PASS - 6.5-decade band, worst |Z| error {worst_mag:.3} % (< 5 %), \
         worst phase error {worst_phase:.3} deg (< 1 deg)"
    );
}

#[test]
fn criterion_2_center_branch_matches_reference_design() {
    let net = reference_net();
    let center = net.center();
    let (r0, c0, c_t) = (center.r, center.c, net.c_t());
    let r_err = r0 / 725.0 - 1.0;
    let c_err = c0 / 110.0 - 1.0;
    let ct_err = c_t / 9840.0 - 1.0;
    assert!(r_err.abs() < 0.15, "R_0 = {r0} ohm");
    assert!(c_err.abs() < 0.15, "C_0 = {c0} F");
    // The reference design fixes the terminating capacitor by a separate
    // low-frequency argument; the geometric tail used here lands within
    // 20 % of it.
    assert!(ct_err.abs() < 0.20, "C_t = {c_t} F");
    println!(
        "criterion 2: PASS - center branch R_0 = {r0:.1} ohm ({:+.1} % of 725), \
         C_0 = {c0:.1} F ({:+.1} % of 110), C_t = {c_t:.0} F ({:+.1} % of 9840)",
        100.0 * r_err,
        100.0 * c_err,
        100.0 * ct_err
    );
}

#[test]
fn criterion_3_simulation_pipeline_recovers_parameters() {
    let sweep = shared_sweep();
    let model = CircuitModel::new(target(), R_S).unwrap();

    // Simulated capacities vs the closed form at the four lowest currents.
    let mut worst_q = 0.0f64;
    for point in sweep.curve.sorted_points().iter().take(4) {
        let q_ref = analytic_capacity(
            &model,
            &CycleProtocol::new(point.current, V_H, V_L).unwrap(),
        )
        .unwrap()
        .capacity;
        worst_q = worst_q.max((point.capacity / q_ref - 1.0).abs());
    }
    assert!(worst_q < 0.02, "worst capacity deviation {worst_q}");

    let r_s_est = fit_rs_intercept(&sweep.curve, 2).unwrap();
    let fit = fit_capacity_curve_with_rs(&sweep.curve, 4, r_s_est).unwrap();
    assert!((fit.alpha - ALPHA).abs() < 0.005, "alpha = {}", fit.alpha);
    assert!((fit.c_f / C_F - 1.0).abs() < 0.03, "c_f = {}", fit.c_f);
    println!(
        "criterion 3: PASS - simulated capacities within {:.2} % of closed form (< 2 %), \
         refit alpha = {:.4} (|d| = {:.4} < 0.005), C_F = {:.0} ({:+.2} %, < 3 %)",
        100.0 * worst_q,
        fit.alpha,
        (fit.alpha - ALPHA).abs(),
        fit.c_f,
        100.0 * (fit.c_f / C_F - 1.0)
    );
}

#[test]
fn criterion_4_series_resistance_from_capacity_intercept() {
    // Exact line: Q = a (1 - I / Ix) crosses zero at Ix = 10.3 A, so
    // R_s = 1.3 / (2 * 10.3) = 63.1 mOhm to four significant figures.
    let line = CapacityCurve::new(
        [2.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&i| CapacityPoint::new(i, 5000.0 * (1.0 - i / 10.3)).unwrap())
            .collect(),
        DELTA_V,
    )
    .unwrap();
    let r_s_line = fit_rs_intercept(&line, 4).unwrap();
    assert!((r_s_line - 0.0631).abs() < 0.5e-4, "r_s = {r_s_line}");

    // Closed-form curve sampled toward the intercept.
    let model = CircuitModel::new(target(), R_S).unwrap();
    let currents = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 8.0, 9.0, 10.0];
    let curve = CapacityCurve::new(
        currents
            .iter()
            .map(|&i0| {
                analytic_capacity(&model, &CycleProtocol::new(i0, V_H, V_L).unwrap()).unwrap()
            })
            .collect(),
        DELTA_V,
    )
    .unwrap();
    let r_s_fit = fit_rs_intercept(&curve, 3).unwrap();
    let err = r_s_fit / R_S - 1.0;
    assert!(err.abs() < 0.05, "r_s = {r_s_fit}");
    println!(
        "criterion 4: PASS - exact line gives R_s = {r_s_line:.6} ohm (= 0.0631 to 4 sig figs), \
         closed-form curve gives {r_s_fit:.4} ohm ({:+.2} %, < 5 %)",
        100.0 * err
    );
}

#[test]
fn criterion_5_impedance_route_with_uncertainty_coverage() {
    let truth = CpeParams::new(0.976, 1.54e4).unwrap();
    let r_s = 0.057;
    let grid = log_grid(MEASUREMENT_BAND, 33);
    let clean: Vec<(f64, Complex64)> = grid
        .iter()
        .map(|&f| (f, cpe_impedance(&truth, f).unwrap() + r_s))
        .collect();

    let fit = fit_impedance_spectrum(&ImpedanceSpectrum::new(clean.clone()).unwrap(), 7, 5)
        .unwrap();
    assert!((fit.alpha / truth.alpha - 1.0).abs() < 0.01, "alpha = {}", fit.alpha);
    assert!((fit.c_f / truth.c_f - 1.0).abs() < 0.01, "c_f = {}", fit.c_f);
    assert!((fit.r_s / r_s - 1.0).abs() < 0.01, "r_s = {}", fit.r_s);

    // 200 noisy replicas at 1 % multiplicative noise: the one-sigma
    // interval on alpha must cover the truth at a plausible rate.
    let mut covered = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut gauss = || {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        };
        let noisy: Vec<(f64, Complex64)> = clean
            .iter()
            .map(|&(f, z)| (f, z * (gauss() * 0.01).exp()))
            .collect();
        let f = fit_impedance_spectrum(&ImpedanceSpectrum::new(noisy).unwrap(), 7, 5).unwrap();
        if (f.alpha - truth.alpha).abs() <= f.alpha_sigma {
            covered += 1;
        }
    }
    let coverage = covered as f64 / 200.0;
    assert!(
        (0.60..=0.80).contains(&coverage),
        "one-sigma coverage {coverage}"
    );
    println!(
        "criterion 5: PASS - noiseless recovery alpha {:.4}, C_F {:.0}, R_s {:.4} (all < 1 % off), \
         one-sigma coverage {coverage:.2} over 200 noisy replicas (in [0.60, 0.80])",
        fit.alpha, fit.c_f, fit.r_s
    );
}

#[test]
fn criterion_6_peukert_law_from_simulated_cycling() {
    let sweep = shared_sweep();
    let n = 1.0 / ALPHA;
    // Remove the series-resistance share of the voltage window first;
    // the power law concerns the fractional element alone.
    let values: Vec<f64> = sweep
        .curve
        .points()
        .iter()
        .map(|p| {
            let q = p.capacity / (1.0 - 2.0 * p.current * R_S / DELTA_V).powf(1.0 / ALPHA);
            p.current.powf(n) * (q / p.current)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values
        .iter()
        .map(|v| (v / mean - 1.0).abs())
        .fold(0.0f64, f64::max);
    assert!(spread < 0.03, "relative spread {spread}");
    println!(
        "criterion 6: PASS - I^n T constant to {:.2} % across {} currents with n = 1/alpha = {:.4} \
         (< 3 %)",
        100.0 * spread,
        values.len(),
        n
    );
}

#[test]
fn criterion_7_fixture_cross_validation() {
    let cap_text = include_str!("fixtures/fig3_capacity.csv");
    let imp_text = include_str!("fixtures/fig1_impedance.csv");
    let curve = CapacityCurve::from_csv_str(cap_text, DELTA_V).unwrap();
    let spectrum = ImpedanceSpectrum::from_csv_str(imp_text).unwrap();

    let r_s_est = fit_rs_intercept(&curve, 4).unwrap();
    let cap_fit = fit_capacity_curve_with_rs(&curve, 4, r_s_est).unwrap();
    let imp_fit = fit_impedance_spectrum(&spectrum, 7, 5).unwrap();
    let cv = cross_validate(&cap_fit, &imp_fit);

    assert!(cv.alpha_diff_sigma < 2.0, "alpha disagreement {} sigma", cv.alpha_diff_sigma);
    assert!(cv.c_f_ratio < 1.0, "c_f ratio {}", cv.c_f_ratio);
    println!(
        "criterion 7: PASS - capacity route alpha = {}, impedance route alpha = {}, \
         agreement {:.2} sigma (< 2), C_F ratio {:.2} (< 1)",
        fracbat::FitResult::parenthetical(cap_fit.alpha, cap_fit.alpha_sigma),
        fracbat::FitResult::parenthetical(imp_fit.alpha, imp_fit.alpha_sigma),
        cv.alpha_diff_sigma,
        cv.c_f_ratio
    );
}

#[test]
fn criterion_8_independent_oracles_agree() {
    // Simulator vs the closed-form constant-current response.
    let net = reference_net();
    let dt = DtPolicy::FromTauMin.resolve(&net);
    let mut state = SimState::relaxed(&net, 0.0);
    while state.t() < 1e4 {
        state = step(&net, &state, 1.0, dt).unwrap();
    }
    let profile = StepCurrentProfile::constant(1.0);
    let v_rl = rl_voltage(&target(), &profile, state.t()).unwrap();
    let sim_err = (state.v_ct() - v_rl).abs() / v_rl;
    assert!(sim_err < 0.01, "simulator vs closed form: {sim_err}");

    // Closed form vs direct quadrature of the memory integral
    // (midpoint rule on a fine graded mesh, singular tail analytic).
    let t = 8000.0;
    let eps = 1e-6 * t;
    let mut quad = 0.0;
    let n = 400_000;
    for k in 0..n {
        let a = (t - eps) * k as f64 / n as f64;
        let b = (t - eps) * (k + 1) as f64 / n as f64;
        quad += (b - a) * (t - 0.5 * (a + b)).powf(ALPHA - 1.0);
    }
    quad += eps.powf(ALPHA) / ALPHA;
    let v_quad = quad / (C_F * gamma(ALPHA));
    let quad_err = (rl_voltage(&target(), &profile, t).unwrap() - v_quad).abs() / v_quad;
    assert!(quad_err < 1e-5, "closed form vs quadrature: {quad_err}");

    // Charge conservation of the stepping scheme under erratic drive.
    let mut state = SimState::relaxed(&net, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20_000 {
        state = step(&net, &state, rng.gen_range(-2.0..2.0), dt).unwrap();
    }
    let q_err = state.charge_error(&net);
    assert!(q_err < 1e-6, "charge conservation error {q_err}");

    println!(
        "criterion 8: PASS - simulator vs closed form {:.3} % (< 1 %), closed form vs \
         quadrature {:.2e} (< 1e-5), charge conservation error {:.2e} (< 1e-6)",
        100.0 * sim_err,
        quad_err,
        q_err
    );
}
