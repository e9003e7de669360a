//! Closed curves, boundary meshes, evaluation grids and region masks.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;
use crate::{vec2, Vec2};

/// Number of vertices of the polygons used for inside tests, areas and centroids.
pub const POLYGON_RESOLUTION: usize = 1024;

/// Kite coefficients: `(cos θ + A cos 2θ − A, B sin θ)`.
const KITE_A: f64 = 0.65;
const KITE_B: f64 = 1.5;

/// Shape catalog for closed curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// `center + scale·(cos θ + 0.65 cos 2θ − 0.65, 1.5 sin θ)`.
    Kite { center: Vec2, scale: f64 },
    /// Polar curve `r(θ) = mean_radius + amplitude·cos(petals·θ)` about `center`.
    Flower {
        center: Vec2,
        mean_radius: f64,
        amplitude: f64,
        petals: u32,
    },
}

impl Shape {
    /// Position on the curve at parameter `theta`.
    pub fn position(&self, theta: f64) -> Vec2 {
        let (s, c) = math::sin_cos(theta);
        match *self {
            Shape::Circle { center, radius } => center + vec2(c, s) * radius,
            Shape::Kite { center, scale } => {
                let (_, c2) = math::sin_cos(2.0 * theta);
                center + vec2(c + KITE_A * c2 - KITE_A, KITE_B * s) * scale
            }
            Shape::Flower { center, mean_radius, amplitude, petals } => {
                let (_, cp) = math::sin_cos(petals as f64 * theta);
                center + vec2(c, s) * (mean_radius + amplitude * cp)
            }
        }
    }

    /// Derivative of the position with respect to `theta`.
    pub fn tangent(&self, theta: f64) -> Vec2 {
        let (s, c) = math::sin_cos(theta);
        match *self {
            Shape::Circle { radius, .. } => vec2(-s, c) * radius,
            Shape::Kite { scale, .. } => {
                let (s2, _) = math::sin_cos(2.0 * theta);
                vec2(-s - 2.0 * KITE_A * s2, KITE_B * c) * scale
            }
            Shape::Flower { mean_radius, amplitude, petals, .. } => {
                let p = petals as f64;
                let (sp, cp) = math::sin_cos(p * theta);
                let r = mean_radius + amplitude * cp;
                let dr = -amplitude * p * sp;
                vec2(c, s) * dr + vec2(-s, c) * r
            }
        }
    }

    /// Outward unit normal (the tangent rotated clockwise).
    pub fn normal(&self, theta: f64) -> Vec2 {
        let d = self.tangent(theta);
        vec2(d.y, -d.x) / d.norm()
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: Vec2| v.x.is_finite() && v.y.is_finite();
        match *self {
            Shape::Circle { center, radius } => {
                if !finite(center) || !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Geometry(format!("circle radius must be positive, got {radius}")));
                }
            }
            Shape::Kite { center, scale } => {
                if !finite(center) || !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Geometry(format!("kite scale must be positive, got {scale}")));
                }
            }
            Shape::Flower { center, mean_radius, amplitude, petals } => {
                if !finite(center) || !(mean_radius > 0.0 && mean_radius.is_finite()) {
                    return Err(Error::Geometry(format!(
                        "flower mean radius must be positive, got {mean_radius}"
                    )));
                }
                if !(amplitude >= 0.0) || amplitude >= mean_radius {
                    return Err(Error::Geometry(format!(
                        "flower amplitude must lie in [0, mean radius), got {amplitude} with mean radius {mean_radius}"
                    )));
                }
                if petals == 0 {
                    return Err(Error::Geometry("flower needs at least one petal".into()));
                }
            }
        }
        Ok(())
    }
}

/// A simple, positively oriented closed curve with cached polygonal data.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    shape: Shape,
    polygon: Vec<Vec2>,
    centroid: Vec2,
    area: f64,
    diameter: f64,
    star_shaped: bool,
}

/// Builds a [`ClosedCurve`], rejecting degenerate or self-intersecting shapes.
pub fn make_curve(shape: Shape) -> Result<ClosedCurve> {
    ClosedCurve::new(shape)
}

impl ClosedCurve {
    pub fn new(shape: Shape) -> Result<Self> {
        shape.validate()?;
        let polygon: Vec<Vec2> = (0..POLYGON_RESOLUTION)
            .map(|i| shape.position(2.0 * PI * i as f64 / POLYGON_RESOLUTION as f64))
            .collect();

        let (area, centroid) = polygon_area_centroid(&polygon);
        if !(area > 0.0) {
            return Err(Error::Geometry(format!(
                "curve must be counterclockwise with positive area, got area {area}"
            )));
        }
        if polygon_self_intersects(&polygon) {
            return Err(Error::Geometry("curve is not simple".into()));
        }

        let star_shaped = (0..POLYGON_RESOLUTION).all(|i| {
            let theta = 2.0 * PI * i as f64 / POLYGON_RESOLUTION as f64;
            let r = shape.position(theta) - centroid;
            let d = shape.tangent(theta);
            r.x * d.y - r.y * d.x > 0.0
        });

        let mut diameter: f64 = 0.0;
        for (i, a) in polygon.iter().enumerate() {
            for b in &polygon[i + 1..] {
                diameter = diameter.max((a - b).norm_squared());
            }
        }
        let diameter = math::sqrt(diameter);

        Ok(Self { shape, polygon, centroid, area, diameter, star_shaped })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn position(&self, theta: f64) -> Vec2 {
        self.shape.position(theta)
    }

    pub fn tangent(&self, theta: f64) -> Vec2 {
        self.shape.tangent(theta)
    }

    pub fn normal(&self, theta: f64) -> Vec2 {
        self.shape.normal(theta)
    }

    /// Centroid of the enclosed region.
    pub fn centroid(&self) -> Vec2 {
        self.centroid
    }

    /// Enclosed area from the fine polygon (Green's theorem).
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Largest distance between two points of the curve.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Whether every ray from the centroid meets the curve exactly once.
    pub fn is_star_shaped(&self) -> bool {
        self.star_shaped
    }

    /// Fine polygonal approximation (counterclockwise).
    pub fn polygon(&self) -> &[Vec2] {
        &self.polygon
    }

    /// Inside test against the fine polygon.
    pub fn contains(&self, p: Vec2) -> bool {
        winding_number(&self.polygon, p) != 0
    }

    /// Distance from `p` to the fine polygon.
    pub fn distance(&self, p: Vec2) -> f64 {
        polygon_distance(&self.polygon, p)
    }

    /// Whether `other` lies strictly inside this curve with at least `margin` clearance.
    pub fn encloses(&self, other: &ClosedCurve, margin: f64) -> bool {
        other
            .polygon
            .iter()
            .all(|&p| self.contains(p) && self.distance(p) > margin)
    }

    /// Axis-aligned bounding box of the fine polygon.
    pub fn bounding_box(&self) -> Rect {
        let mut min = self.polygon[0];
        let mut max = self.polygon[0];
        for p in &self.polygon {
            min = min.inf(p);
            max = max.sup(p);
        }
        Rect { min, max }
    }
}

fn polygon_area_centroid(poly: &[Vec2]) -> (f64, Vec2) {
    let n = poly.len();
    let mut a2 = 0.0;
    let mut c = Vec2::zeros();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        c += (p + q) * cross;
    }
    let area = 0.5 * a2;
    (area, c / (3.0 * a2))
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let orient = |p: Vec2, q: Vec2, r: Vec2| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn polygon_self_intersects(poly: &[Vec2]) -> bool {
    // A coarser polygon keeps the O(n²) check cheap; crossings of a smooth curve
    // persist under moderate subsampling.
    let step = (poly.len() / 256).max(1);
    let coarse: Vec<Vec2> = poly.iter().step_by(step).copied().collect();
    let n = coarse.len();
    for i in 0..n {
        let (a, b) = (coarse[i], coarse[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, coarse[j], coarse[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(poly: &[Vec2], p: Vec2) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let is_left = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && is_left > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && is_left < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn polygon_distance(poly: &[Vec2], p: Vec2) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = b - a;
        let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        best = best.min((a + ab * s - p).norm_squared());
    }
    math::sqrt(best)
}

/// Discretized closed curve: chord midpoints, exact outward normals at the
/// midpoint parameters, and chord lengths.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub centers: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub lengths: Vec<f64>,
    /// Curve parameter at which each normal was evaluated.
    pub params: Vec<f64>,
    pub curve: ClosedCurve,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Sum of chord lengths.
    pub fn perimeter(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    /// Mesh with every normal reversed.
    pub fn with_flipped_normals(&self) -> Self {
        let mut out = self.clone();
        for n in &mut out.normals {
            *n = -*n;
        }
        out
    }
}

/// Minimum number of boundary segments.
pub const MIN_SEGMENTS: usize = 8;

/// Splits `curve` into `n` segments at uniform parameters `θ_j = 2πj/n`.
pub fn discretize(curve: &ClosedCurve, n: usize) -> Result<BoundaryMesh> {
    if n < MIN_SEGMENTS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SEGMENTS} boundary segments required, got {n}"
        )));
    }
    let h = 2.0 * PI / n as f64;
    let vertices: Vec<Vec2> = (0..n).map(|j| curve.position(h * j as f64)).collect();
    let mut centers = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    for j in 0..n {
        let a = vertices[j];
        let b = vertices[(j + 1) % n];
        let theta = h * (j as f64 + 0.5);
        centers.push((a + b) * 0.5);
        lengths.push((b - a).norm());
        normals.push(curve.normal(theta));
        params.push(theta);
    }
    Ok(BoundaryMesh { centers, normals, lengths, params, curve: curve.clone() })
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn unit_square() -> Self {
        Self::new(vec2(0.0, 0.0), vec2(1.0, 1.0))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Temperature samples on a cell-centered uniform grid at one time.
///
/// `values` are stored row-major by `y` then `x`: index `iy·nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    /// Center of cell `(0, 0)`.
    pub origin: Vec2,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

/// Zero-valued cell-centered grid covering `bbox`.
pub fn uniform_grid(bbox: Rect, nx: usize, ny: usize) -> Result<FieldGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2×2 cells, got {nx}×{ny}")));
    }
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(Error::InvalidArgument("empty bounding box".into()));
    }
    let dx = bbox.width() / nx as f64;
    let dy = bbox.height() / ny as f64;
    Ok(FieldGrid {
        origin: bbox.min + vec2(0.5 * dx, 0.5 * dy),
        nx,
        ny,
        dx,
        dy,
        values: alloc::vec![0.0; nx * ny],
        time: 0.0,
    })
}

impl FieldGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + vec2(ix as f64 * self.dx, iy as f64 * self.dy)
    }

    /// Cell centers in storage order.
    pub fn points(&self) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(self.point(ix, iy));
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.index(ix, iy)]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn bounding_box(&self) -> Rect {
        let half = vec2(0.5 * self.dx, 0.5 * self.dy);
        let span = vec2((self.nx - 1) as f64 * self.dx, (self.ny - 1) as f64 * self.dy);
        Rect::new(self.origin - half, self.origin + span + half)
    }

    /// Same geometry with new values.
    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", self.len()),
                found: format!("{}", values.len()),
            });
        }
        Ok(Self { values, time, ..self.clone() })
    }

    pub fn same_geometry(&self, other: &FieldGrid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.origin == other.origin
            && self.dx == other.dx
            && self.dy == other.dy
    }

    /// Cellwise `f(self, other)`.
    pub fn zip_with(&self, other: &FieldGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_geometry(other) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{} grid", self.nx, self.ny),
                found: format!("{}×{} grid", other.nx, other.ny),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// `sqrt(cell area · Σ v²)` over the masked cells.
    pub fn l2_norm(&self, mask: &RegionMask) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(&mask.cells)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v * v)
            .sum();
        math::sqrt(sum * self.cell_area())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Boolean per grid cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

/// Marks cells whose centers lie inside `curve` scaled by `1 + scale` about its centroid.
pub fn region_mask(grid: &FieldGrid, curve: &ClosedCurve, scale: f64) -> Result<RegionMask> {
    if !(1.0 + scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor 1 + {scale} must be positive")));
    }
    if scale != 0.0 && !curve.is_star_shaped() {
        return Err(Error::Geometry(
            "buffered regions require a curve that is star-shaped about its centroid".into(),
        ));
    }
    let c = curve.centroid();
    let poly: Vec<Vec2> = curve.polygon().iter().map(|&p| c + (p - c) * (1.0 + scale)).collect();
    let cells = grid.points().into_iter().map(|p| winding_number(&poly, p) != 0).collect();
    Ok(RegionMask { nx: grid.nx, ny: grid.ny, cells })
}

impl RegionMask {
    pub fn full(nx: usize, ny: usize) -> Self {
        Self { nx, ny, cells: alloc::vec![true; nx * ny] }
    }

    pub fn complement(&self) -> Self {
        Self { cells: self.cells.iter().map(|c| !c).collect(), ..self.clone() }
    }

    pub fn and(&self, other: &RegionMask) -> Self {
        Self {
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a && *b).collect(),
            ..self.clone()
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.cells.iter().zip(&other.cells).all(|(a, b)| !*a || *b)
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.nx + ix]
    }

    /// Whether a cell within Chebyshev distance `radius` of `(ix, iy)` has the
    /// opposite mask value (or lies off the grid).
    pub fn near_edge(&self, ix: usize, iy: usize, radius: usize) -> bool {
        let here = self.get(ix, iy);
        let r = radius as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                let x = ix as isize + dx;
                let y = iy as isize + dy;
                if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                    return true;
                }
                if self.get(x as usize, y as usize) != here {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn circle() -> ClosedCurve {
        make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap()
    }

    #[test]
    fn circle_position_and_normal() {
        let c = circle();
        assert_relative_eq!(c.position(0.0), vec2(0.75, 0.5), epsilon = 1e-15);
        assert_relative_eq!(c.normal(0.0), vec2(1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(c.area(), PI * 0.0625, max_relative = 1e-4);
        assert_relative_eq!(c.centroid(), vec2(0.5, 0.5), epsilon = 1e-12);
        assert!(c.is_star_shaped());
    }

    #[test]
    fn kite_shape() {
        let k = make_curve(Shape::Kite { center: vec2(0.0, 0.0), scale: 1.0 }).unwrap();
        assert_relative_eq!(k.position(0.0), vec2(1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(k.position(PI / 2.0), vec2(-1.3, 1.5), epsilon = 1e-15);
        assert!(k.area() > 0.0);
        assert!(k.is_star_shaped());
        // Winding oracle: the center of the kite body is inside, the notch tip is outside.
        assert!(k.contains(vec2(0.0, 0.0)));
        assert!(!k.contains(vec2(-1.45, 0.0)));
    }

    #[test]
    fn flower_validation() {
        let f = make_curve(Shape::Flower {
            center: vec2(0.5, 0.5),
            mean_radius: 0.12,
            amplitude: 0.03,
            petals: 5,
        })
        .unwrap();
        assert_relative_eq!(f.position(0.0), vec2(0.65, 0.5), epsilon = 1e-15);
        assert!(f.area() > 0.0);
        assert!(make_curve(Shape::Flower {
            center: vec2(0.5, 0.5),
            mean_radius: 0.12,
            amplitude: 0.12,
            petals: 5
        })
        .is_err());
        assert!(make_curve(Shape::Circle { center: vec2(0.0, 0.0), radius: 0.0 }).is_err());
    }

    #[test]
    fn discretize_circle() {
        let c = circle();
        assert!(discretize(&c, 4).is_err());
        let m = discretize(&c, 8).unwrap();
        for &l in &m.lengths {
            assert_relative_eq!(l, 0.5 * (PI / 8.0).sin(), max_relative = 1e-14);
        }
        let m = discretize(&c, 128).unwrap();
        for (x, n) in m.centers.iter().zip(&m.normals) {
            let radial = (x - vec2(0.5, 0.5)).normalize();
            assert_relative_eq!(*n, radial, epsilon = 1e-12);
        }
        let exact = 2.0 * 128.0 * 0.25 * (PI / 128.0).sin();
        assert_relative_eq!(m.perimeter(), exact, max_relative = 1e-13);
        assert!((m.perimeter() - 2.0 * PI * 0.25).abs() / (2.0 * PI * 0.25) < 1e-3);
    }

    #[test]
    fn grid_geometry() {
        let g = uniform_grid(Rect::unit_square(), 200, 200).unwrap();
        assert_relative_eq!(g.dx, 0.005);
        let g = uniform_grid(Rect::unit_square(), 2, 2).unwrap();
        assert_eq!(g.point(0, 0), vec2(0.25, 0.25));
        assert_eq!(g.point(1, 0), vec2(0.75, 0.25));
        assert_eq!(g.point(0, 1), vec2(0.25, 0.75));
        assert_eq!(g.bounding_box(), Rect::unit_square());
        assert!(uniform_grid(Rect::unit_square(), 1, 5).is_err());
        assert!(uniform_grid(Rect::new(vec2(0.0, 0.0), vec2(0.0, 1.0)), 5, 5).is_err());
    }

    #[test]
    fn masks() {
        let g = uniform_grid(Rect::unit_square(), 100, 100).unwrap();
        let c = circle();
        let inner = region_mask(&g, &c, -0.05).unwrap();
        let plain = region_mask(&g, &c, 0.0).unwrap();
        let outer = region_mask(&g, &c, 0.05).unwrap();
        assert!(inner.is_subset_of(&plain));
        assert!(plain.is_subset_of(&outer));
        for (p, &m) in g.points().iter().zip(&inner.cells) {
            assert_eq!(m, (p - vec2(0.5, 0.5)).norm() < 0.2375, "{p:?}");
        }
        let ext = outer.complement();
        assert_eq!(ext.count() + outer.count(), g.len());
        assert!(region_mask(&g, &c, -1.0).is_err());
    }
}
