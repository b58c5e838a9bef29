//! Values frozen from `tests/oracles/generate.py` (mpmath, 50 digits).

// digits are kept exactly as the script printed them
#![allow(clippy::excessive_precision)]

use roq_core::experiments::{inv_dist_integral_1d, inv_dist_integral_2d};
use roq_core::families::{
    ligo_psd, log_training_set, n_cycles, spa_waveform, PhysicalConstants, F_HIGH_HZ, F_LOW_HZ, MC_HIGH_SOLAR,
    MC_LOW_SOLAR,
};
use roq_core::linalg::{matrix_two_norm, ComplexMatrix, C64};
use roq_core::quadrature::gauss_legendre_rule;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn spa_waveform_at_ten_solar_masses() {
    let k = PhysicalConstants::default();
    let h = spa_waveform(10.0 * k.m_sun, 100.0, 1.0, &k).unwrap();
    // the phase is ~2e3 rad, so its absolute rounding sets the tolerance
    assert!((h.re - 0.00017138089375342658842).abs() < 1e-14, "{h}");
    assert!((h.im - -0.004638423815217310856).abs() < 1e-14, "{h}");
}

#[test]
fn psd_values() {
    assert!(rel(ligo_psd(40.0).unwrap(), 5.7110337176295889947e-44) < 1e-13);
    assert!(rel(ligo_psd(150.0).unwrap(), 9.0e-46) < 1e-14);
}

#[test]
fn cycle_counts_at_band_edges() {
    let k = PhysicalConstants::default();
    let lo = n_cycles(MC_LOW_SOLAR * k.m_sun, F_LOW_HZ, F_HIGH_HZ, &k).unwrap();
    let hi = n_cycles(MC_HIGH_SOLAR * k.m_sun, F_LOW_HZ, F_HIGH_HZ, &k).unwrap();
    assert!(rel(lo, 435.48139090462047585) < 1e-13, "{lo}");
    assert!(rel(hi, 9.3821621542824960196) < 1e-13, "{hi}");
}

#[test]
fn log_training_midpoint() {
    let k = PhysicalConstants::default();
    let t = log_training_set(MC_LOW_SOLAR * k.m_sun, MC_HIGH_SOLAR * k.m_sun, 3000).unwrap();
    assert!(rel(t[1500], 1.6432335476826235849e31) < 1e-13, "{}", t[1500]);
}

#[test]
fn gauss_legendre_400_outer_node() {
    let r = gauss_legendre_rule(400).unwrap();
    let last = r.len() - 1;
    assert!((r.nodes()[last] - 0.99998197270396245071).abs() < 1e-15);
    assert!(rel(r.weights()[last], 0.000046263724177190118157) < 1e-10);
}

#[test]
fn inverse_distance_integrals() {
    assert!((inv_dist_integral_1d(0.05) - 5.9939799597894440801).abs() < 1e-13);
    let outer = gauss_legendre_rule(1200).unwrap();
    assert!((inv_dist_integral_2d([0.03, -0.07], &outer) - 6.4427880414946494067).abs() < 1e-11);
}

#[test]
fn spectral_norm_of_fixed_matrix() {
    let c = |re: f64, im: f64| C64::new(re, im);
    let a = ComplexMatrix::from_rows(&[
        vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)],
        vec![c(2.0, -1.0), c(4.0, 0.5), c(-1.0, -1.0)],
        vec![c(0.0, 0.0), c(1.5, 2.0), c(0.25, 0.0)],
        vec![c(-3.0, 0.0), c(0.0, -2.0), c(1.0, 1.0)],
    ])
    .unwrap();
    let n = matrix_two_norm(&a).unwrap();
    // power iteration stops at a 1e-10 relative change of the eigenvalue
    assert!(rel(n, 6.2815450770334212391) < 1e-10, "{n}");
}
