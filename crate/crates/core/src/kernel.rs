//! The free-space heat kernel, its derivatives, the initial-condition kernel `φ`,
//! and the growth-condition residual.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;
use crate::special::ein;
use crate::Vec2;

/// Thermal diffusivity `k > 0` in m²/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Diffusivity(f64);

impl Diffusivity {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(Self(k))
        } else {
            Err(Error::InvalidArgument(alloc::format!(
                "diffusivity must be positive and finite, got {k}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Tolerance on `|n| − 1` for normals passed to the derivative functions.
pub const UNIT_NORMAL_TOL: f64 = 1e-12;

/// 2-D heat kernel from the squared distance. Returns 0 for `t ≤ 0`.
#[inline(always)]
pub(crate) fn kernel_r2(r2: f64, t: f64, k: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let kt4 = 4.0 * k * t;
    math::exp(-r2 / kt4) / (PI * kt4)
}

/// Heat kernel `K(x, t) = (4πkt)^{−d/2} exp(−|x|²/4kt)` in `d = x.len()` dimensions,
/// and exactly 0 for `t ≤ 0`.
pub fn kernel_value_nd(x: &[f64], t: f64, k: Diffusivity) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let kt4 = 4.0 * k.get() * t;
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let d = x.len() as i32;
    let norm = if d % 2 == 0 {
        math::powi(PI * kt4, d / 2)
    } else {
        math::powf(PI * kt4, 0.5 * d as f64)
    };
    math::exp(-r2 / kt4) / norm
}

/// Two-dimensional heat kernel.
#[inline]
pub fn kernel_value(x: Vec2, t: f64, k: Diffusivity) -> f64 {
    kernel_r2(x.norm_squared(), t, k.get())
}

fn positive_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

fn unit_normal(n: Vec2) -> Result<()> {
    let len = n.norm();
    if (len - 1.0).abs() <= UNIT_NORMAL_TOL {
        Ok(())
    } else {
        Err(Error::NonUnitNormal(len))
    }
}

/// Spatial gradient `∇K(x, t) = −K(x, t)·x/(2kt)`.
pub fn kernel_gradient(x: Vec2, t: f64, k: Diffusivity) -> Result<Vec2> {
    positive_time(t)?;
    let kv = kernel_value(x, t, k);
    Ok(x * (-kv / (2.0 * k.get() * t)))
}

/// Directional derivative `∇K(x, t)·n` for a unit vector `n`.
pub fn kernel_normal_derivative(x: Vec2, n: Vec2, t: f64, k: Diffusivity) -> Result<f64> {
    unit_normal(n)?;
    Ok(kernel_gradient(x, t, k)?.dot(&n))
}

/// Spatial Hessian of `K`, `K/(2kt)·(x xᵀ/(2kt) − I)`.
pub fn kernel_hessian(x: Vec2, t: f64, k: Diffusivity) -> Result<nalgebra::Matrix2<f64>> {
    positive_time(t)?;
    let kt2 = 2.0 * k.get() * t;
    let kv = kernel_value(x, t, k);
    let outer = x * x.transpose() / kt2;
    Ok((outer - nalgebra::Matrix2::identity()) * (kv / kt2))
}

/// Time derivative `∂K/∂t = K·(|x|²/(4kt²) − 1/t)`.
pub fn kernel_time_derivative(x: Vec2, t: f64, k: Diffusivity) -> Result<f64> {
    positive_time(t)?;
    let kv = kernel_value(x, t, k);
    Ok(kv * (x.norm_squared() / (4.0 * k.get() * t * t) - 1.0 / t))
}

/// Initial-condition kernel `φ(x, t) = −Ein(|x|²/4kt)/(4π)`.
///
/// It satisfies `Δφ = −K`, so for harmonic `f`,
/// `∫_Ω f K(x−y) dy = ∫_∂Ω (φ ∂f/∂n − f ∂φ/∂n)(x−y) dS_y`.
pub fn phi_value(x: Vec2, t: f64, k: Diffusivity) -> Result<f64> {
    positive_time(t)?;
    let z = x.norm_squared() / (4.0 * k.get() * t);
    Ok(-ein(z)? / (4.0 * PI))
}

/// Gradient `∇φ(x, t) = −(1 − e^{−z})·x/(2π|x|²)` with `z = |x|²/4kt`;
/// `−x/(8πkt)` in the limit `x → 0`.
pub fn phi_gradient(x: Vec2, t: f64, k: Diffusivity) -> Result<Vec2> {
    positive_time(t)?;
    let r2 = x.norm_squared();
    let kt4 = 4.0 * k.get() * t;
    let z = r2 / kt4;
    // (1 − e^{−z})/r² = (1 − e^{−z})/z / (4kt); the ratio tends to 1 as z → 0.
    let ratio = if z < 1e-300 { 1.0 } else { -math::exp_m1(-z) / z };
    Ok(x * (-ratio / (2.0 * PI * kt4)))
}

/// Hessian of `φ`: `−(h(z) I + 2h'(z) x xᵀ/4kt)/(2π·4kt)` with `h(z) = (1 − e^{−z})/z`.
pub fn phi_hessian(x: Vec2, t: f64, k: Diffusivity) -> Result<nalgebra::Matrix2<f64>> {
    positive_time(t)?;
    let kt4 = 4.0 * k.get() * t;
    let z = x.norm_squared() / kt4;
    let (h, dh) = if z < 1e-4 {
        (1.0 - z / 2.0 + z * z / 6.0, -0.5 + z / 3.0 - z * z / 8.0)
    } else {
        let one_minus = -math::exp_m1(-z);
        (one_minus / z, (z * math::exp(-z) - one_minus) / (z * z))
    };
    let outer = x * x.transpose() * (2.0 * dh / kt4);
    Ok((nalgebra::Matrix2::identity() * h + outer) * (-1.0 / (2.0 * PI * kt4)))
}

/// Parameters of the growth condition
/// `|∂v/∂n(rξ, t) + (2r/4kt) v(rξ, t)| ≤ C r^m exp(a r^b)` for `r > r0`, all `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthParams {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub m: i32,
    pub r0: f64,
}

impl GrowthParams {
    pub fn new(c: f64, a: f64, b: f64, m: i32, r0: f64) -> Result<Self> {
        if !(c > 0.0) || !(a >= 0.0) || !(0.0..2.0).contains(&b) || !(r0 > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "growth parameters out of range: C={c}, a={a}, b={b}, r0={r0}"
            )));
        }
        Ok(Self { c, a, b, m, r0 })
    }

    /// Right-hand side `C r^m exp(a r^b)` of the bound.
    pub fn bound(&self, r: f64) -> f64 {
        self.c * math::powi(r, self.m) * math::exp(self.a * math::powf(r, self.b))
    }
}

/// Growth-condition residual `|∂v/∂n(rξ, t) + (2r/4kt) v(rξ, t)|` with the radial
/// derivative taken by central differences of step `ε^{1/3}·r`.
pub fn growth_residual<F>(field: F, r: f64, xi: Vec2, t: f64, k: Diffusivity) -> Result<f64>
where
    F: Fn(Vec2, f64) -> f64,
{
    positive_time(t)?;
    unit_normal(xi)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "radius must be positive, got {r}"
        )));
    }
    let h = math::cbrt(f64::EPSILON) * r;
    let dv = (field(xi * (r + h), t) - field(xi * (r - h), t)) / (2.0 * h);
    Ok(growth_residual_exact(dv, field(xi * r, t), r, t, k))
}

/// Growth-condition residual from an analytically supplied radial derivative.
#[inline]
pub fn growth_residual_exact(radial_derivative: f64, value: f64, r: f64, t: f64, k: Diffusivity) -> f64 {
    (radial_derivative + 2.0 * r / (4.0 * k.get() * t) * value).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;
    use approx::assert_relative_eq;

    fn k(v: f64) -> Diffusivity {
        Diffusivity::new(v).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_value(vec2(1.0, 0.0), 0.0, k(1.0)), 0.0);
        assert_eq!(kernel_value(vec2(1.0, 0.0), -1.0, k(1.0)), 0.0);
        assert_relative_eq!(
            kernel_value(vec2(0.0, 0.0), 0.7, k(0.3)),
            1.0 / (4.0 * PI * 0.3 * 0.7),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            kernel_value(vec2(0.1, 0.1), 0.1, k(0.2)),
            3.098_749_857_741_324_2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn kernel_nd_matches_2d_and_1d() {
        let x = [0.3, -0.2];
        assert_relative_eq!(
            kernel_value_nd(&x, 0.4, k(0.5)),
            kernel_value(vec2(0.3, -0.2), 0.4, k(0.5)),
            max_relative = 1e-14
        );
        let one = kernel_value_nd(&[0.3], 0.4, k(0.5));
        let want = (4.0 * PI * 0.2f64).powf(-0.5) * (-0.09f64 / 0.8).exp();
        assert_relative_eq!(one, want, max_relative = 1e-14);
        let three = kernel_value_nd(&[0.3, 0.0, 0.0], 0.4, k(0.5));
        assert_relative_eq!(three, want * (4.0 * PI * 0.2f64).powf(-1.0), max_relative = 1e-14);
    }

    #[test]
    fn gradient_and_normal_derivative() {
        let g = kernel_gradient(vec2(0.1, 0.0), 0.1, k(0.2)).unwrap();
        assert_relative_eq!(g.x, -8.778_359_019_351_574, max_relative = 1e-13);
        assert_eq!(g.y, 0.0);
        assert_eq!(kernel_gradient(vec2(0.0, 0.0), 0.3, k(0.2)).unwrap(), vec2(0.0, 0.0));
        let a = kernel_gradient(vec2(0.13, -0.07), 0.2, k(0.3)).unwrap();
        let b = kernel_gradient(vec2(-0.13, 0.07), 0.2, k(0.3)).unwrap();
        assert_relative_eq!(a, -b, max_relative = 1e-15);
        assert!(kernel_gradient(vec2(0.1, 0.0), 0.0, k(0.2)).is_err());

        let dn = kernel_normal_derivative(vec2(0.1, 0.0), vec2(1.0, 0.0), 0.1, k(0.2)).unwrap();
        assert_relative_eq!(dn, -8.778_359_019_351_574, max_relative = 1e-13);
        let dn = kernel_normal_derivative(vec2(0.1, 0.0), vec2(0.0, 1.0), 0.1, k(0.2)).unwrap();
        assert_eq!(dn, 0.0);
        assert!(matches!(
            kernel_normal_derivative(vec2(0.1, 0.0), vec2(1.0, 1.0), 0.1, k(0.2)),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let kk = k(0.2);
        let x = vec2(0.1, 0.0);
        let h = 1e-6;
        let fd = (kernel_value(x + vec2(h, 0.0), 0.1, kk) - kernel_value(x - vec2(h, 0.0), 0.1, kk))
            / (2.0 * h);
        assert_relative_eq!(kernel_gradient(x, 0.1, kk).unwrap().x, fd, max_relative = 1e-8);
    }

    #[test]
    fn hessian_values() {
        let h = kernel_hessian(vec2(0.1, 0.05), 0.1, k(0.2)).unwrap();
        assert_relative_eq!(h[(0, 0)], -63.812_079_792_905_35, max_relative = 1e-13);
        assert_relative_eq!(h[(0, 1)], 10.635_346_632_150_892, max_relative = 1e-13);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }

    #[test]
    fn heat_equation_holds() {
        let kk = k(0.25);
        for &(x, t) in &[(vec2(0.2, 0.1), 0.05), (vec2(-1.0, 0.4), 0.7), (vec2(0.01, 0.0), 0.002)] {
            let lap = kernel_hessian(x, t, kk).unwrap().trace();
            let kt = kernel_time_derivative(x, t, kk).unwrap();
            let scale = kernel_value(x, t, kk).max(1.0);
            assert!((kt - kk.get() * lap).abs() <= 1e-10 * scale * (1.0 / t));
        }
    }

    #[test]
    fn phi_values() {
        let kk = k(0.2);
        assert_eq!(phi_value(vec2(0.0, 0.0), 0.1, kk).unwrap(), 0.0);
        let r = (4.0f64 * 0.2 * 0.1).sqrt();
        assert_relative_eq!(
            phi_value(vec2(r, 0.0), 0.1, kk).unwrap(),
            -0.063_391_381_946_574_56,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            phi_value(vec2(0.1, 0.05), 0.1, kk).unwrap(),
            -0.011_964_660_259_756_72,
            max_relative = 1e-13
        );
        assert!(phi_value(vec2(0.1, 0.0), 0.0, kk).is_err());
        let mut last = 0.0;
        for i in 1..50 {
            let v = phi_value(vec2(0.05 * i as f64, 0.0), 0.1, kk).unwrap().abs();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn phi_gradient_values() {
        let kk = k(0.2);
        let g = phi_gradient(vec2(0.1, 0.05), 0.1, kk).unwrap();
        assert_relative_eq!(g.x, -0.184_180_049_602_911_3, max_relative = 1e-13);
        assert_relative_eq!(g.y, -0.092_090_024_801_455_65, max_relative = 1e-13);
        let g0 = phi_gradient(vec2(1e-200, 0.0), 0.1, kk).unwrap();
        assert_relative_eq!(g0.x, -1e-200 / (8.0 * PI * 0.02), max_relative = 1e-12);
    }

    #[test]
    fn phi_hessian_matches_gradient_differences() {
        let kk = k(0.2);
        let t = 0.1;
        let h = 1e-6;
        for x in [vec2(0.1, 0.05), vec2(0.003, -0.002), vec2(0.9, 0.4)] {
            let hs = phi_hessian(x, t, kk).unwrap();
            for (col, e) in [vec2(h, 0.0), vec2(0.0, h)].into_iter().enumerate() {
                let d = (phi_gradient(x + e, t, kk).unwrap() - phi_gradient(x - e, t, kk).unwrap()) / (2.0 * h);
                assert_relative_eq!(hs[(0, col)], d.x, epsilon = 1e-7, max_relative = 1e-6);
                assert_relative_eq!(hs[(1, col)], d.y, epsilon = 1e-7, max_relative = 1e-6);
            }
            assert_relative_eq!(hs.trace(), -kernel_value(x, t, kk), max_relative = 1e-10);
        }
    }

    #[test]
    fn laplacian_of_phi_is_minus_kernel() {
        let kk = k(0.3);
        let t = 0.2;
        let x = vec2(0.2, -0.15);
        let h = 1e-4;
        let lap = (phi_value(x + vec2(h, 0.0), t, kk).unwrap()
            + phi_value(x - vec2(h, 0.0), t, kk).unwrap()
            + phi_value(x + vec2(0.0, h), t, kk).unwrap()
            + phi_value(x - vec2(0.0, h), t, kk).unwrap()
            - 4.0 * phi_value(x, t, kk).unwrap())
            / (h * h);
        assert_relative_eq!(lap, -kernel_value(x, t, kk), max_relative = 1e-5);
    }

    #[test]
    fn growth_residual_of_kernel_vanishes() {
        let kk = k(0.2);
        let f = |x: Vec2, t: f64| kernel_value(x, t, kk);
        let x = vec2(1.2, 1.6);
        let res = growth_residual(f, 2.0, vec2(0.6, 0.8), 1.0, kk).unwrap();
        let term = 2.0 * 2.0 / (4.0 * 0.2) * kernel_value(x, 1.0, kk);
        assert!(res < 1e-9 * term, "{res} vs {term}");
        let zero = growth_residual(|_, _| 0.0, 2.0, vec2(1.0, 0.0), 1.0, kk).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn growth_params_validation() {
        assert!(GrowthParams::new(1.0, 0.0, 1.5, 0, 1.0).is_ok());
        assert!(GrowthParams::new(1.0, 0.0, 2.0, 0, 1.0).is_err());
        assert!(GrowthParams::new(1.0, 0.0, 0.5, 0, 0.0).is_err());
    }

    #[test]
    fn diffusivity_rejects_nonpositive() {
        assert!(Diffusivity::new(0.0).is_err());
        assert!(Diffusivity::new(-1.0).is_err());
        assert!(Diffusivity::new(f64::INFINITY).is_err());
    }
}
