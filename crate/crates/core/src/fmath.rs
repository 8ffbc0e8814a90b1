//! Thin wrappers over `libm` so the crate stays `no_std` and every
//! transcendental evaluates identically on every platform.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `x^n` by repeated multiplication; exact for the small integer powers
/// used in the debiasing systems.
pub fn powi(x: f64, n: i32) -> f64 {
    let (mut base, mut k) = if n < 0 { (1.0 / x, -(n as i64)) } else { (x, n as i64) };
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}
