//! Shared numeric helpers: normal distribution functions and trigonometry
//! that is exact at the protocol phase angles.

use std::f64::consts::{PI, SQRT_2};

/// Standard normal density.
pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, Phi(z).
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal survival function, 1 - Phi(z), without cancellation in the
/// upper tail.
pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Cosine of an angle in degrees, exact at multiples of 90.
///
/// The protocol only ever uses the four phases 0, 90, 180, 270 and the two
/// receiver bases 0, 90; returning exact values there keeps wrong-basis means
/// at exactly zero instead of ~1e-16.
pub(crate) fn cos_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d == 0.0 {
        1.0
    } else if d == 90.0 || d == 270.0 {
        0.0
    } else if d == 180.0 {
        -1.0
    } else {
        d.to_radians().cos()
    }
}

/// Sine of an angle in degrees, exact at multiples of 90.
pub(crate) fn sin_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d == 0.0 || d == 180.0 {
        0.0
    } else if d == 90.0 {
        1.0
    } else if d == 270.0 {
        -1.0
    } else {
        d.to_radians().sin()
    }
}
