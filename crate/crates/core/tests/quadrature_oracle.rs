//! Checks the closed-form step-response superposition against a direct
//! numerical evaluation of the fractional integral
//!     V(t) = 1/(C_F Gamma(alpha)) * int_0^t I(tau) (t - tau)^(alpha-1) dtau
//! using adaptive Simpson quadrature split at the current steps, with the
//! singular endpoint handled analytically over the last sliver (where the
//! current is constant).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use fracbat::{rl_voltage, CpeParams, StepCurrentProfile};

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, right, 0.5 * tol, depth - 1)
}

fn quadrature_voltage(cpe: &CpeParams, profile: &StepCurrentProfile, t: f64) -> f64 {
    let alpha = cpe.alpha;
    let segs = profile.segments();
    let t_active = segs
        .iter()
        .rev()
        .find(|&&(s, _)| s < t)
        .map(|&(s, _)| s)
        .unwrap();
    // The current is constant over the segment containing t, so the
    // singular piece over [t - eps, t] integrates to I * eps^alpha /
    // alpha exactly. Taking eps as half that segment keeps the
    // singularity well away from the quadrature, whose integrand is
    // then smooth.
    let eps = 0.5 * (t - t_active);
    let kernel = |tau: f64| profile.current_at(tau) * (t - tau).powf(alpha - 1.0);

    let mut boundaries: Vec<f64> = segs
        .iter()
        .map(|&(s, _)| s)
        .filter(|&s| s < t - eps)
        .collect();
    boundaries.push(t - eps);
    let mut integral = 0.0;
    for w in boundaries.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let whole = simpson(&kernel, a, b);
        let tol = 1e-10 * (1.0 + whole.abs());
        integral += adaptive(&kernel, a, b, whole, tol, 24);
    }
    integral += profile.current_at(t - eps) * eps.powf(alpha) / alpha;
    integral / (cpe.c_f * gamma(alpha))
}

#[test]
fn superposition_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..20 {
        let alpha = rng.gen_range(0.55..1.0);
        let c_f = rng.gen_range(1.0..2e4);
        let cpe = CpeParams::new(alpha, c_f).unwrap();

        let n_segs = rng.gen_range(1..=6);
        let mut start = 0.0;
        let mut segs = Vec::new();
        for k in 0..n_segs {
            if k > 0 {
                start += rng.gen_range(0.5..20.0);
            }
            segs.push((start, rng.gen_range(-2.0..2.0f64)));
        }
        let profile = StepCurrentProfile::new(segs).unwrap();
        let t = start + rng.gen_range(0.5..10.0);

        let v_closed = rl_voltage(&cpe, &profile, t).unwrap();
        let v_quad = quadrature_voltage(&cpe, &profile, t);
        let scale = v_closed.abs().max(1e-3 / c_f).max(1e-12);
        assert!(
            (v_closed - v_quad).abs() / scale < 1e-6,
            "case {case}: closed form {v_closed} vs quadrature {v_quad} \
             (alpha {alpha}, c_f {c_f}, t {t})"
        );
    }
}

#[test]
fn quadrature_agrees_for_the_reference_cell_discharge() {
    let cpe = CpeParams::new(0.9711, 9203.0).unwrap();
    let profile = StepCurrentProfile::new(vec![(0.0, -1.0), (13000.0, 1.0)]).unwrap();
    for &t in &[100.0, 5000.0, 13000.5, 20000.0] {
        let v_closed = rl_voltage(&cpe, &profile, t).unwrap();
        let v_quad = quadrature_voltage(&cpe, &profile, t);
        assert!(
            (v_closed - v_quad).abs() / v_closed.abs() < 1e-6,
            "t = {t}: {v_closed} vs {v_quad}"
        );
    }
}
