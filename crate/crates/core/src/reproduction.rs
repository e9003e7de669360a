//! Interior and exterior representation formulas, point-source traces, error
//! metrics and density noise.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, FieldGrid, RegionMask};
use crate::kernel::{kernel_r2, Diffusivity};
use crate::math;
use crate::potentials::{eval_layers, LayerSource, SpaceTimeDensity, TimeGrid};
use crate::Vec2;

/// Dirichlet and Neumann traces of a field on a mesh at the density sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    /// `u` on the boundary.
    pub dirichlet: SpaceTimeDensity,
    /// `∂u/∂n` on the boundary.
    pub neumann: SpaceTimeDensity,
}

impl TracePair {
    pub fn new(dirichlet: SpaceTimeDensity, neumann: SpaceTimeDensity) -> Result<Self> {
        if dirichlet.rows() != neumann.rows() || dirichlet.cols() != neumann.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{}", dirichlet.rows(), dirichlet.cols()),
                found: format!("{}×{}", neumann.rows(), neumann.cols()),
            });
        }
        Ok(Self { dirichlet, neumann })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            dirichlet: SpaceTimeDensity::zeros(rows, cols),
            neumann: SpaceTimeDensity::zeros(rows, cols),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { dirichlet: self.dirichlet.scaled(alpha), neumann: self.neumann.scaled(alpha) }
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        Ok(Self {
            dirichlet: self.dirichlet.axpy(alpha, &other.dirichlet)?,
            neumann: self.neumann.axpy(alpha, &other.neumann)?,
        })
    }
}

/// Instantaneous point source `strength·δ(x − location)` released at `t = 0`;
/// its field is `strength·K(x − location, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub location: Vec2,
    pub strength: f64,
}

impl PointSource {
    pub fn new(location: Vec2) -> Self {
        Self { location, strength: 1.0 }
    }

    pub fn with_strength(location: Vec2, strength: f64) -> Self {
        Self { location, strength }
    }

    #[inline]
    pub fn value(&self, x: Vec2, t: f64, k: Diffusivity) -> f64 {
        self.strength * kernel_r2((x - self.location).norm_squared(), t, k.get())
    }

    /// Spatial gradient; zero for `t ≤ 0`.
    #[inline]
    pub fn gradient(&self, x: Vec2, t: f64, k: Diffusivity) -> Vec2 {
        if t <= 0.0 {
            return Vec2::zeros();
        }
        let d = x - self.location;
        d * (-self.value(x, t, k) / (2.0 * k.get() * t))
    }
}

/// Traces of a point-source field on `mesh` at the density sample times.
pub fn point_source_traces(
    src: &PointSource,
    mesh: &BoundaryMesh,
    tg: &TimeGrid,
    k: Diffusivity,
) -> Result<TracePair> {
    if let Some(index) = mesh.centers.iter().position(|c| *c == src.location) {
        return Err(Error::InvalidArgument(format!(
            "point source coincides with boundary node {index}"
        )));
    }
    let n = mesh.len();
    let dirichlet = SpaceTimeDensity::from_fn(tg.steps(), n, |m, s| {
        src.value(mesh.centers[s], tg.density_time(m), k)
    });
    let neumann = SpaceTimeDensity::from_fn(tg.steps(), n, |m, s| {
        src.gradient(mesh.centers[s], tg.density_time(m), k).dot(&mesh.normals[s])
    });
    Ok(TracePair { dirichlet, neumann })
}

/// `SL[∂u/∂n] − DL[u]`: reproduces `u` inside the curve and vanishes outside.
pub fn interior_source(traces: &TracePair) -> LayerSource<'_> {
    LayerSource { single: Some((1.0, &traces.neumann)), double: Some((-1.0, &traces.dirichlet)) }
}

/// `DL[v] − SL[∂v/∂n]`: reproduces `v` outside the curve and vanishes inside.
pub fn exterior_source(traces: &TracePair) -> LayerSource<'_> {
    LayerSource { single: Some((-1.0, &traces.neumann)), double: Some((1.0, &traces.dirichlet)) }
}

/// Interior reproduction at step `j`.
pub fn interior_reproduce(
    traces: &TracePair,
    mesh: &BoundaryMesh,
    targets: &[Vec2],
    tg: &TimeGrid,
    j: usize,
    k: Diffusivity,
) -> Result<Vec<f64>> {
    let mut out = eval_layers(mesh, &[interior_source(traces)], targets, tg, &[j], k)?;
    Ok(out.swap_remove(0).swap_remove(0))
}

/// Exterior reproduction at step `j`; the exact negative of [`interior_reproduce`].
pub fn exterior_reproduce(
    traces: &TracePair,
    mesh: &BoundaryMesh,
    targets: &[Vec2],
    tg: &TimeGrid,
    j: usize,
    k: Diffusivity,
) -> Result<Vec<f64>> {
    let mut out = eval_layers(mesh, &[exterior_source(traces)], targets, tg, &[j], k)?;
    Ok(out.swap_remove(0).swap_remove(0))
}

/// Which side carries the reproduced field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReproductionMode {
    Interior,
    Exterior,
}

/// Error metrics on the shrunken interior `Ω₋` and the exterior of the grown `Ω₊`.
///
/// Interior mode fills `relerr_minus` and `err_plus`; exterior mode fills
/// `err_minus` and `relerr_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorMetrics {
    pub relerr_minus: Option<f64>,
    pub err_plus: Option<f64>,
    pub err_minus: Option<f64>,
    pub relerr_plus: Option<f64>,
    /// The reference norm was below [`NEAR_ZERO_REFERENCE`], so the "relative"
    /// entry holds the absolute error instead.
    pub relative_is_absolute: bool,
}

/// Reference norms below this are treated as zero for relative errors.
pub const NEAR_ZERO_REFERENCE: f64 = 1e-12;

fn relative(diff: f64, reference: f64, region: &'static str, flag: &mut bool) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::ZeroReference(region));
    }
    if reference < NEAR_ZERO_REFERENCE {
        *flag = true;
        return Ok(diff);
    }
    Ok(diff / reference)
}

/// L² errors by Riemann sums over masked cells.
///
/// `reference` is the field to be reproduced; the expected result is
/// `reference` on the reproduced side and zero on the other. `inner` is the
/// shrunken region `Ω₋`, `outer` the exterior of the grown region `Ω₊`.
pub fn reproduction_errors(
    field: &FieldGrid,
    reference: &FieldGrid,
    inner: &RegionMask,
    outer: &RegionMask,
    mode: ReproductionMode,
) -> Result<ErrorMetrics> {
    let diff = field.zip_with(reference, |a, b| a - b)?;
    for mask in [inner, outer] {
        if mask.nx != field.nx || mask.ny != field.ny {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{} mask", field.nx, field.ny),
                found: format!("{}×{}", mask.nx, mask.ny),
            });
        }
    }
    let mut flag = false;
    let mut out = ErrorMetrics::default();
    match mode {
        ReproductionMode::Interior => {
            out.relerr_minus = Some(relative(
                diff.l2_norm(inner),
                reference.l2_norm(inner),
                "interior",
                &mut flag,
            )?);
            out.err_plus = Some(field.l2_norm(outer));
        }
        ReproductionMode::Exterior => {
            out.err_minus = Some(field.l2_norm(inner));
            out.relerr_plus = Some(relative(
                diff.l2_norm(outer),
                reference.l2_norm(outer),
                "exterior",
                &mut flag,
            )?);
        }
    }
    out.relative_is_absolute = flag;
    Ok(out)
}

/// Adds to each row an independent Gaussian vector with per-entry standard
/// deviation `fraction·‖row‖₂`. Deterministic for a given seed (ChaCha8).
pub fn perturb_density(density: &SpaceTimeDensity, fraction: f64, seed: u64) -> Result<SpaceTimeDensity> {
    if !(fraction >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise fraction must be >= 0, got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = density.clone();
    for m in 0..out.rows() {
        let row = out.row_mut(m);
        let norm = math::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        let std = fraction * norm;
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += std * z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, make_curve, region_mask, uniform_grid, Rect, Shape};
    use crate::vec2;
    use approx::assert_relative_eq;

    fn setup() -> (BoundaryMesh, TimeGrid, Diffusivity) {
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        (discretize(&c, 64).unwrap(), TimeGrid::from_final_time(0.1, 50).unwrap(), Diffusivity::new(0.3).unwrap())
    }

    #[test]
    fn traces_of_point_source() {
        let (mesh, tg, k) = setup();
        let t = point_source_traces(&PointSource::new(vec2(0.25, 0.25)), &mesh, &tg, k).unwrap();
        assert!(t.dirichlet.as_slice().iter().all(|v| *v > 0.0 && v.is_finite()));
        let z = point_source_traces(&PointSource::with_strength(vec2(0.25, 0.25), 0.0), &mesh, &tg, k).unwrap();
        assert_eq!(z.dirichlet.max_abs(), 0.0);
        assert_eq!(z.neumann.max_abs(), 0.0);
        let far = point_source_traces(&PointSource::new(vec2(5.0, 5.0)), &mesh, &TimeGrid::new(1e-4, 3).unwrap(), k).unwrap();
        assert_eq!(far.dirichlet.max_abs(), 0.0);
        assert!(point_source_traces(&PointSource::new(mesh.centers[7]), &mesh, &tg, k).is_err());
    }

    #[test]
    fn interior_and_exterior_are_negatives() {
        let (mesh, tg, k) = setup();
        let traces = point_source_traces(&PointSource::new(vec2(0.2, 0.3)), &mesh, &tg, k).unwrap();
        let targets = [vec2(0.5, 0.52), vec2(0.9, 0.1), vec2(0.3, 0.6)];
        let a = interior_reproduce(&traces, &mesh, &targets, &tg, 50, k).unwrap();
        let b = exterior_reproduce(&traces, &mesh, &targets, &tg, 50, k).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert_eq!(*a, -*b);
        }
        let zero = TracePair::zeros(50, 64);
        assert_eq!(interior_reproduce(&zero, &mesh, &targets, &tg, 50, k).unwrap(), alloc::vec![0.0; 3]);
    }

    #[test]
    fn interior_reproduction_is_linear() {
        let (mesh, tg, k) = setup();
        let traces = point_source_traces(&PointSource::new(vec2(0.2, 0.3)), &mesh, &tg, k).unwrap();
        let targets = [vec2(0.5, 0.52)];
        let a = interior_reproduce(&traces, &mesh, &targets, &tg, 40, k).unwrap()[0];
        let b = interior_reproduce(&traces.scaled(-2.5), &mesh, &targets, &tg, 40, k).unwrap()[0];
        assert_relative_eq!(b, -2.5 * a, max_relative = 1e-13);
    }

    #[test]
    fn interior_reproduction_reproduces_source() {
        let (mesh, tg, k) = setup();
        let src = PointSource::new(vec2(0.2, 0.3));
        let traces = point_source_traces(&src, &mesh, &tg, k).unwrap();
        let inside = vec2(0.52, 0.47);
        let outside = vec2(0.95, 0.8);
        let v = interior_reproduce(&traces, &mesh, &[inside, outside], &tg, 50, k).unwrap();
        let exact = src.value(inside, 0.1, k);
        assert!((v[0] - exact).abs() < 1e-3 * exact, "{} vs {exact}", v[0]);
        assert!(v[1].abs() < 1e-3 * exact);
    }

    #[test]
    fn error_metrics() {
        let g = uniform_grid(Rect::unit_square(), 40, 40).unwrap();
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        let inner = region_mask(&g, &c, -0.05).unwrap();
        let outer = region_mask(&g, &c, 0.05).unwrap().complement();
        let reference = g.map(|_| 0.0).with_values(g.points().iter().map(|p| 1.0 + p.x).collect(), 0.1).unwrap();
        let same = reproduction_errors(&reference, &reference, &inner, &outer, ReproductionMode::Interior).unwrap();
        assert_eq!(same.relerr_minus, Some(0.0));
        assert!(same.err_plus.unwrap() > 0.0);
        assert_eq!(same.err_minus, None);
        let zero = g.clone();
        let e = reproduction_errors(&zero, &reference, &inner, &outer, ReproductionMode::Interior).unwrap();
        assert_relative_eq!(e.relerr_minus.unwrap(), 1.0);
        assert_eq!(e.err_plus, Some(0.0));
        let e = reproduction_errors(&zero, &reference, &inner, &outer, ReproductionMode::Exterior).unwrap();
        assert_relative_eq!(e.relerr_plus.unwrap(), 1.0);
        assert!(matches!(
            reproduction_errors(&zero, &zero, &inner, &outer, ReproductionMode::Interior),
            Err(Error::ZeroReference(_))
        ));
        let tiny = reference.map(|v| v * 1e-16);
        let e = reproduction_errors(&zero, &tiny, &inner, &outer, ReproductionMode::Interior).unwrap();
        assert!(e.relative_is_absolute);
    }

    #[test]
    fn noise() {
        let d = SpaceTimeDensity::from_fn(5, 10, |m, s| if m == 2 { 0.0 } else { (m + s) as f64 });
        assert_eq!(perturb_density(&d, 0.0, 1).unwrap(), d);
        let a = perturb_density(&d, 0.03, 7).unwrap();
        let b = perturb_density(&d, 0.03, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, perturb_density(&d, 0.03, 8).unwrap());
        assert!(a.row(2).iter().all(|v| *v == 0.0));
        assert!(perturb_density(&d, -0.1, 1).is_err());
    }

    #[test]
    fn noise_has_requested_spread() {
        let d = SpaceTimeDensity::from_fn(1, 20000, |_, _| 1.0);
        let p = perturb_density(&d, 0.001, 3).unwrap();
        let norm = (20000.0f64).sqrt();
        let var: f64 = p.row(0).iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / 20000.0;
        assert_relative_eq!(var.sqrt(), 0.001 * norm, max_relative = 0.03);
    }
}
