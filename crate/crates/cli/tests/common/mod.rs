//! Seeded random circuit populations shared by the integration tests.

#![allow(dead_code)]

use gndline_core::conversion::ConversionNetwork;
use gndline_core::coupling::CouplingNetwork;
use gndline_core::ImpedanceElement;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const POPULATION: usize = 1000;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// An element whose impedance at `omega` is `R + jX` with `R` and `|X|`
/// log-uniform over [1e-3, 1e7] ohm and a random sign on `X`.
pub fn random_element(rng: &mut ChaCha8Rng, omega: f64) -> ImpedanceElement {
    let r = log_uniform(rng, 1e-3, 1e7);
    let x = log_uniform(rng, 1e-3, 1e7);
    let element = if rng.gen_bool(0.5) {
        ImpedanceElement::new(r, x / omega, None)
    } else {
        ImpedanceElement::new(r, 0.0, Some(1.0 / (omega * x)))
    };
    element.expect("generated element is valid")
}

/// Angular frequency log-uniform over 50 Hz to 500 kHz.
pub fn random_omega(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * std::f64::consts::PI * log_uniform(rng, 50.0, 5e5)
}

pub fn random_coupling(rng: &mut ChaCha8Rng) -> (CouplingNetwork, f64) {
    let omega = random_omega(rng);
    let mut e = || random_element(rng, omega);
    let net = CouplingNetwork {
        source_amplitude: 1.0,
        z_ga1: e(),
        z_sa1: e(),
        z_gs1: e(),
        z_ga2: e(),
        z_sa2: e(),
        z_gs2: e(),
        z_g: e(),
        z_s: e(),
        z_v: e(),
    };
    (net, omega)
}

pub fn random_conversion(rng: &mut ChaCha8Rng) -> (ConversionNetwork, f64) {
    let omega = random_omega(rng);
    let mut e = || random_element(rng, omega);
    let net = ConversionNetwork {
        z_1i: e(),
        z_2i: e(),
        z_3i: e(),
        z_1o: e(),
        z_2o: e(),
        z_3o: e(),
        z_l: e(),
        z_r: e(),
    };
    (net, omega)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
