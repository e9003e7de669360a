//! Harmonic initial conditions written as boundary integrals.
//!
//! For harmonic `f` the free-space evolution of the initial state `f·1_Ω` is
//! `∫_Ω f(y) K(x − y, t) dy = ∫_∂Ω (φ ∂f/∂n − f ∂φ/∂n)(x − y) dS_y`, where
//! `φ = −Ein(|x|²/4kt)/4π` solves `Δφ = −K`. Ein is entire, so `φ` is smooth
//! and the identity holds at every `x`, inside or outside `Ω`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, ClosedCurve};
use crate::kernel::{phi_gradient, phi_hessian, phi_value, Diffusivity};
use crate::Vec2;

/// Cubic polynomial in `u = y − origin` with monomials
/// `1, u₁, u₂, u₁², u₁u₂, u₂², u₁³, u₁²u₂, u₁u₂², u₂³`, checked to be harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPolynomial {
    origin: Vec2,
    coeffs: [f64; 10],
}

/// Relative size of a discrete Laplacian treated as zero.
const HARMONIC_TOL: f64 = 1e-8;

impl HarmonicPolynomial {
    /// Rejects polynomials whose five-point Laplacian does not vanish.
    pub fn new(origin: Vec2, coeffs: [f64; 10]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("polynomial coefficients must be finite".into()));
        }
        let p = Self { origin, coeffs };
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let h = 0.05;
        for &(a, b) in &[(0.0, 0.0), (0.7, -0.3), (-0.4, 0.9), (1.3, 1.1), (-1.2, -0.8)] {
            let y = origin + Vec2::new(a, b);
            let lap = (p.value(y + Vec2::new(h, 0.0))
                + p.value(y - Vec2::new(h, 0.0))
                + p.value(y + Vec2::new(0.0, h))
                + p.value(y - Vec2::new(0.0, h))
                - 4.0 * p.value(y))
                / (h * h);
            if lap.abs() > HARMONIC_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "initial condition is not harmonic: discrete Laplacian {lap:.3e} at ({:.3}, {:.3})",
                    y.x, y.y
                )));
            }
        }
        Ok(p)
    }

    /// `f ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Vec2::zeros(), [c, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// `f(y) = y₁`.
    pub fn y1() -> Self {
        Self { origin: Vec2::zeros(), coeffs: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    /// `f(y) = y₂`.
    pub fn y2() -> Self {
        Self { origin: Vec2::zeros(), coeffs: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    /// `f(y) = y₁² − y₂²`.
    pub fn saddle() -> Self {
        Self { origin: Vec2::zeros(), coeffs: [0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0] }
    }

    /// `f(y) = y₁ y₂`.
    pub fn cross() -> Self {
        Self { origin: Vec2::zeros(), coeffs: [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    /// `f(y) = y₁³ − 3 y₁ y₂²`.
    pub fn cubic() -> Self {
        Self { origin: Vec2::zeros(), coeffs: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -3.0, 0.0] }
    }

    /// Catalog lookup: `one`, `y1`, `y2`, `saddle`, `cross`, `cubic`.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "one" => Self::constant(1.0).ok()?,
            "y1" => Self::y1(),
            "y2" => Self::y2(),
            "saddle" => Self::saddle(),
            "cross" => Self::cross(),
            "cubic" => Self::cubic(),
            _ => return None,
        })
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn coeffs(&self) -> &[f64; 10] {
        &self.coeffs
    }

    /// The polynomial multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { origin: self.origin, coeffs: self.coeffs.map(|c| c * alpha) }
    }

    pub fn value(&self, y: Vec2) -> f64 {
        let u = y - self.origin;
        let (a, b) = (u.x, u.y);
        let c = &self.coeffs;
        c[0] + c[1] * a
            + c[2] * b
            + c[3] * a * a
            + c[4] * a * b
            + c[5] * b * b
            + c[6] * a * a * a
            + c[7] * a * a * b
            + c[8] * a * b * b
            + c[9] * b * b * b
    }

    pub fn gradient(&self, y: Vec2) -> Vec2 {
        let u = y - self.origin;
        let (a, b) = (u.x, u.y);
        let c = &self.coeffs;
        Vec2::new(
            c[1] + 2.0 * c[3] * a + c[4] * b + 3.0 * c[6] * a * a + 2.0 * c[7] * a * b + c[8] * b * b,
            c[2] + c[4] * a + 2.0 * c[5] * b + c[7] * a * a + 2.0 * c[8] * a * b + 3.0 * c[9] * b * b,
        )
    }
}

/// Nodes, outward normals and weights of a quadrature rule on a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl BoundaryQuadrature {
    /// The mesh rule: chord midpoints weighted by chord lengths.
    pub fn from_mesh(mesh: &BoundaryMesh) -> Self {
        Self { points: mesh.centers.clone(), normals: mesh.normals.clone(), weights: mesh.lengths.clone() }
    }

    /// Trapezoidal rule in the curve parameter with exact speed weights;
    /// spectrally accurate for smooth periodic integrands.
    pub fn from_curve(curve: &ClosedCurve, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 quadrature nodes, got {n}")));
        }
        let dth = 2.0 * core::f64::consts::PI / n as f64;
        let mut q = Self { points: Vec::with_capacity(n), normals: Vec::with_capacity(n), weights: Vec::with_capacity(n) };
        for j in 0..n {
            let th = j as f64 * dth;
            q.points.push(curve.position(th));
            q.normals.push(curve.normal(th));
            q.weights.push(curve.tangent(th).norm() * dth);
        }
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Boundary form `∫_∂Ω (φ ∂f/∂n − f ∂φ/∂n)(x − y) dS_y` of `∫_Ω f K(x − y, t) dy`.
/// Zero for `t ≤ 0`.
pub fn boundary_form(f: &HarmonicPolynomial, quad: &BoundaryQuadrature, x: Vec2, t: f64, k: Diffusivity) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for ((&y, &n), &w) in quad.points.iter().zip(&quad.normals).zip(&quad.weights) {
        let d = x - y;
        // ∂/∂n_y of φ(x − y) is −∇φ(x − y)·n.
        acc += w * (phi_value(d, t, k)? * f.gradient(y).dot(&n) + f.value(y) * phi_gradient(d, t, k)?.dot(&n));
    }
    Ok(acc)
}

/// Spatial gradient of [`boundary_form`] with respect to `x`.
pub fn boundary_form_gradient(
    f: &HarmonicPolynomial,
    quad: &BoundaryQuadrature,
    x: Vec2,
    t: f64,
    k: Diffusivity,
) -> Result<Vec2> {
    if t <= 0.0 {
        return Ok(Vec2::zeros());
    }
    let mut acc = Vec2::zeros();
    for ((&y, &n), &w) in quad.points.iter().zip(&quad.normals).zip(&quad.weights) {
        let d = x - y;
        acc += (phi_gradient(d, t, k)? * f.gradient(y).dot(&n) + phi_hessian(d, t, k)? * n * f.value(y)) * w;
    }
    Ok(acc)
}

/// `∫_Ω f(y) K(x − y, t) dy` by nested adaptive double-exponential quadrature
/// in polar coordinates about the curve center.
///
/// Only curves given in polar form (circles and flowers) are supported.
#[cfg(feature = "std")]
pub fn volume_integral(
    f: &HarmonicPolynomial,
    curve: &ClosedCurve,
    x: Vec2,
    t: f64,
    k: Diffusivity,
    abs_tol: f64,
) -> Result<f64> {
    use crate::geometry::Shape;
    use crate::kernel::kernel_value;
    use quadrature::double_exponential::integrate;

    if t <= 0.0 {
        return Err(Error::NonPositiveTime(t));
    }
    let (center, radius): (Vec2, alloc::boxed::Box<dyn Fn(f64) -> f64>) = match *curve.shape() {
        Shape::Circle { center, radius } => (center, alloc::boxed::Box::new(move |_| radius)),
        Shape::Flower { center, mean_radius, amplitude, petals } => (
            center,
            alloc::boxed::Box::new(move |th: f64| mean_radius + amplitude * (petals as f64 * th).cos()),
        ),
        Shape::Kite { .. } => {
            return Err(Error::InvalidArgument("volume quadrature needs a curve in polar form".into()))
        }
    };
    let two_pi = 2.0 * core::f64::consts::PI;
    let inner_tol = abs_tol / (4.0 * two_pi);
    let out = integrate(
        |th| {
            let e = Vec2::new(th.cos(), th.sin());
            integrate(
                |rho| {
                    let y = center + e * rho;
                    f.value(y) * kernel_value(x - y, t, k) * rho
                },
                0.0,
                radius(th),
                inner_tol,
            )
            .integral
        },
        0.0,
        two_pi,
        abs_tol / 2.0,
    );
    Ok(out.integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, make_curve, Shape};
    use crate::vec2;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_check() {
        assert!(HarmonicPolynomial::new(vec2(0.3, 0.1), [1.0, 2.0, -1.0, 1.0, 5.0, -1.0, 1.0, 0.0, -3.0, 0.0]).is_ok());
        // y₁² is not harmonic.
        assert!(HarmonicPolynomial::new(Vec2::zeros(), [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        // Neither is y₁²y₂.
        assert!(HarmonicPolynomial::new(Vec2::zeros(), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).is_err());
        for name in ["one", "y1", "y2", "saddle", "cross", "cubic"] {
            let p = HarmonicPolynomial::from_name(name).unwrap();
            assert_eq!(HarmonicPolynomial::new(p.origin(), *p.coeffs()).unwrap(), p);
        }
        assert!(HarmonicPolynomial::from_name("square").is_none());
    }

    #[test]
    fn gradient_matches_differences() {
        let p = HarmonicPolynomial::new(vec2(0.3, 0.1), [1.0, 2.0, -1.0, 1.0, 5.0, -1.0, 1.0, 0.5, -3.0, -0.5 / 3.0]).unwrap();
        let y = vec2(0.7, -0.2);
        let h = 1e-6;
        let g = p.gradient(y);
        assert_relative_eq!(g.x, (p.value(y + vec2(h, 0.0)) - p.value(y - vec2(h, 0.0))) / (2.0 * h), max_relative = 1e-8);
        assert_relative_eq!(g.y, (p.value(y + vec2(0.0, h)) - p.value(y - vec2(0.0, h))) / (2.0 * h), max_relative = 1e-8);
    }

    #[test]
    fn constant_boundary_form_is_a_probability() {
        // ∫_Ω K(x − y, t) dy → 1 inside and 0 outside as t → 0.
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        let q = BoundaryQuadrature::from_curve(&c, 256).unwrap();
        let one = HarmonicPolynomial::constant(1.0).unwrap();
        let k = Diffusivity::new(0.2).unwrap();
        assert_relative_eq!(boundary_form(&one, &q, vec2(0.5, 0.5), 1e-4, k).unwrap(), 1.0, epsilon = 1e-10);
        assert!(boundary_form(&one, &q, vec2(0.9, 0.9), 1e-4, k).unwrap().abs() < 1e-10);
        let mid = boundary_form(&one, &q, vec2(0.6, 0.55), 0.5, k).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(boundary_form(&one, &q, vec2(0.5, 0.5), 0.0, k).unwrap(), 0.0);
    }

    #[test]
    fn gradient_of_boundary_form() {
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        let q = BoundaryQuadrature::from_mesh(&discretize(&c, 64).unwrap());
        let f = HarmonicPolynomial::saddle();
        let k = Diffusivity::new(0.3).unwrap();
        let x = vec2(0.62, 0.41);
        let h = 1e-5;
        let g = boundary_form_gradient(&f, &q, x, 0.05, k).unwrap();
        let dx = (boundary_form(&f, &q, x + vec2(h, 0.0), 0.05, k).unwrap()
            - boundary_form(&f, &q, x - vec2(h, 0.0), 0.05, k).unwrap())
            / (2.0 * h);
        let dy = (boundary_form(&f, &q, x + vec2(0.0, h), 0.05, k).unwrap()
            - boundary_form(&f, &q, x - vec2(0.0, h), 0.05, k).unwrap())
            / (2.0 * h);
        assert_relative_eq!(g.x, dx, max_relative = 1e-6);
        assert_relative_eq!(g.y, dy, max_relative = 1e-6);
    }

    #[cfg(feature = "std")]
    #[test]
    fn volume_and_boundary_forms_agree() {
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        let q = BoundaryQuadrature::from_curve(&c, 256).unwrap();
        let k = Diffusivity::new(0.2).unwrap();
        for f in [HarmonicPolynomial::y1(), HarmonicPolynomial::cubic()] {
            for x in [vec2(0.55, 0.45), vec2(0.9, 0.2)] {
                let v = volume_integral(&f, &c, x, 0.05, k, 1e-12).unwrap();
                let b = boundary_form(&f, &q, x, 0.05, k).unwrap();
                assert!((v - b).abs() < 1e-9, "{v} vs {b}");
            }
        }
        let kite = make_curve(Shape::Kite { center: vec2(0.5, 0.5), scale: 0.1 }).unwrap();
        assert!(volume_integral(&HarmonicPolynomial::y1(), &kite, vec2(0.5, 0.5), 0.1, k, 1e-9).is_err());
    }
}
