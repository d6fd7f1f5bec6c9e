//! Analytic internal impedance of a round wire, used as a reference.

#![allow(dead_code)]

use num_complex::Complex64;

/// Bessel function of the first kind of integer order, power series.
pub fn bessel_j(n: u32, z: Complex64) -> Complex64 {
    let half = z / 2.0;
    let mut term = half.powu(n);
    for k in 1..=n {
        term /= k as f64;
    }
    let mut sum = term;
    let q = -half * half;
    for m in 1..200u32 {
        term = term * q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// Per-unit-length internal impedance `k J0(kr) / (2π r σ J1(kr))` with
/// `k² = -jωμσ`.
pub fn wire_impedance(radius: f64, sigma: f64, mu: f64, freq: f64) -> Complex64 {
    let omega = 2.0 * std::f64::consts::PI * freq;
    let k = (Complex64::new(0.0, -omega * mu * sigma)).sqrt();
    let kr = k * radius;
    k * bessel_j(0, kr) / (2.0 * std::f64::consts::PI * radius * sigma * bessel_j(1, kr))
}

pub fn dc_resistance(radius: f64, sigma: f64) -> f64 {
    1.0 / (sigma * std::f64::consts::PI * radius * radius)
}
