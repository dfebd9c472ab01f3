//! Shared setup for the criterion benchmarks.

use fracbat::{synthesize, CpeParams, MorrisonNetwork, MorrisonSpec};

pub const ALPHA: f64 = 0.9711;
pub const C_F: f64 = 9203.0;

pub fn reference_network() -> MorrisonNetwork {
    let spec = MorrisonSpec::new(CpeParams::new(ALPHA, C_F).unwrap(), 30, 1.4).unwrap();
    let f0 = 1.0 / (std::f64::consts::TAU * 725.0 * 110.0);
    synthesize(&spec, (f0 / 1e3, f0 * 1e3)).unwrap()
}
