//! Exponential-integral functions.

use crate::error::{Error, Result};
use crate::math;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Switchover between the power series and the `E1(z) + ln z + γ` branch.
pub const EIN_SWITCHOVER: f64 = 30.0;

/// The entire exponential integral `Ein(z) = ∫_0^z (1 − e^{−s})/s ds`.
///
/// For `z ≤ 30` the value comes from the series
/// `Ein(z) = e^{−z} Σ_{n≥1} H_n z^n / n!` (all terms positive, `H_n` the
/// harmonic numbers), which equals the alternating series
/// `Σ (−1)^{n+1} z^n / (n·n!)` but does not suffer cancellation.
/// Above that, `E1(z) + ln z + γ` with a continued fraction for `E1`.
pub fn ein(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "Ein requires z >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z <= EIN_SWITCHOVER {
        Ok(ein_series(z))
    } else {
        Ok(e1_continued_fraction(z) + math::ln(z) + EULER_GAMMA)
    }
}

/// Alternating defining series, summed directly.
///
/// Only accurate for small `z` (it cancels catastrophically for `z` beyond a few units);
/// kept as a reference for tests.
pub fn ein_alternating_series(z: f64) -> f64 {
    let mut term = 1.0; // z^n / n!
    let mut sum = 0.0;
    let mut sign = 1.0;
    for n in 1..500 {
        term *= z / n as f64;
        let add = sign * term / n as f64;
        sum += add;
        sign = -sign;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn ein_series(z: f64) -> f64 {
    let mut term = 1.0; // z^n / n!
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for n in 1..1000 {
        let nf = n as f64;
        term *= z / nf;
        harmonic += 1.0 / nf;
        let add = harmonic * term;
        sum += add;
        if nf > z && add <= 1e-17 * sum {
            break;
        }
    }
    math::exp(-z) * sum
}

/// Exponential integral `E1(z) = ∫_z^∞ e^{−s}/s ds` for `z > 0`.
pub fn e1(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "E1 requires z > 0, got {z}"
        )));
    }
    if z <= 1.0 {
        Ok(ein_series(z) - math::ln(z) - EULER_GAMMA)
    } else {
        Ok(e1_continued_fraction(z))
    }
}

// E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))), modified Lentz.
fn e1_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * math::exp(-z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // High-precision reference values.
    const REFERENCE: &[(f64, f64)] = &[
        (1e-8, 9.999_999_975_000_000_264_8e-9),
        (0.5, 0.443_842_079_117_748_362_94),
        (1.0, 0.796_599_599_297_053_134_28),
        (2.5, 1.518_421_314_645_976_661_3),
        (7.0, 2.523_241_295_688_456_503_9),
        (15.0, 3.285_265_885_190_021_848_1),
        (29.9, 3.975_074_145_298_176_906_1),
        (30.0, 3.978_413_046_563_691_257_6),
        (30.1, 3.981_740_836_656_365_677_6),
        (45.0, 4.383_878_154_671_852_618),
        (100.0, 5.182_385_850_889_624_228_6),
    ];

    #[test]
    fn matches_reference_values() {
        for &(z, want) in REFERENCE {
            assert_relative_eq!(ein(z).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_and_negative() {
        assert_eq!(ein(0.0).unwrap(), 0.0);
        assert!(ein(-1e-9).is_err());
        assert!(ein(f64::NAN).is_err());
    }

    #[test]
    fn branches_agree_at_switchover() {
        let z = EIN_SWITCHOVER;
        let upper = e1_continued_fraction(z) + math::ln(z) + EULER_GAMMA;
        assert_relative_eq!(ein_series(z), upper, max_relative = 1e-12);
    }

    #[test]
    fn alternating_series_agrees_where_it_is_stable() {
        for i in 0..=40 {
            let z = i as f64 * 0.05;
            assert_relative_eq!(
                ein(z).unwrap(),
                ein_alternating_series(z),
                max_relative = 1e-13,
                epsilon = 1e-300
            );
        }
    }

    #[test]
    fn derivative() {
        for &z in &[0.3, 1.0, 4.0, 12.0, 29.0, 31.0, 60.0] {
            let h = 1e-5 * z;
            let fd = (ein(z + h).unwrap() - ein(z - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(fd, -math::exp_m1(-z) / z, max_relative = 1e-8);
        }
    }

    #[test]
    fn e1_values() {
        assert_relative_eq!(e1(1.0).unwrap(), 0.219_383_934_395_520_27, max_relative = 1e-14);
        assert_relative_eq!(e1(0.1).unwrap(), 1.822_923_958_419_390_7, max_relative = 1e-14);
        assert_relative_eq!(e1(5.0).unwrap(), 0.001_148_295_591_275_325_8, max_relative = 1e-13);
        assert!(e1(0.0).is_err());
    }
}
