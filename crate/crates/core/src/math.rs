// Float functions that resolve to std intrinsics with the `std` feature and to
// libm otherwise.

use num_traits::Float;

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    Float::exp(x)
}

#[inline(always)]
pub(crate) fn exp_m1(x: f64) -> f64 {
    Float::exp_m1(x)
}

#[inline(always)]
pub(crate) fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline(always)]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    Float::powi(x, n)
}

#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    Float::powf(x, y)
}

#[inline(always)]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    Float::sin_cos(x)
}

#[inline(always)]
pub(crate) fn round(x: f64) -> f64 {
    Float::round(x)
}

#[inline(always)]
pub(crate) fn cbrt(x: f64) -> f64 {
    Float::cbrt(x)
}
