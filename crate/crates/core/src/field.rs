//! Fields built from point sources and layer potentials, evaluated on grids,
//! at boundary nodes, or at arbitrary space-time points.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, FieldGrid};
use crate::initial::{boundary_form, boundary_form_gradient, BoundaryQuadrature, HarmonicPolynomial};
use crate::kernel::Diffusivity;
use crate::potentials::{
    eval_layers, eval_layers_at, eval_layers_gradient, LayerSource, SpaceTimeDensity, TimeGrid,
};
use crate::reproduction::{PointSource, TracePair};
use crate::{math, Vec2};

/// One additive piece of a [`FieldModel`].
#[derive(Debug, Clone)]
pub enum FieldTerm {
    Source(PointSource),
    /// `a·SL[single] + b·DL[double]` on `mesh`.
    Layers {
        mesh: Arc<BoundaryMesh>,
        single: Option<(f64, Arc<SpaceTimeDensity>)>,
        double: Option<(f64, Arc<SpaceTimeDensity>)>,
    },
    /// Free evolution of the harmonic initial state `f·1_Ω`, written as a
    /// boundary integral over `quad`.
    Initial { f: HarmonicPolynomial, quad: Arc<BoundaryQuadrature> },
}

/// Sum of point-source fields and discrete layer potentials sharing one time grid.
///
/// Every term is a superposition of heat-kernel translates, so the model solves
/// the heat equation away from its boundaries and sources.
#[derive(Debug, Clone)]
pub struct FieldModel {
    terms: Vec<FieldTerm>,
    tg: TimeGrid,
    k: Diffusivity,
}

impl FieldModel {
    pub fn new(tg: TimeGrid, k: Diffusivity) -> Self {
        Self { terms: Vec::new(), tg, k }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tg
    }

    pub fn diffusivity(&self) -> Diffusivity {
        self.k
    }

    pub fn terms(&self) -> &[FieldTerm] {
        &self.terms
    }

    pub fn with_source(mut self, src: PointSource) -> Self {
        self.terms.push(FieldTerm::Source(src));
        self
    }

    /// Adds the free evolution of the initial state `f·1_Ω`, `Ω` enclosed by `quad`.
    pub fn with_initial(mut self, f: HarmonicPolynomial, quad: &Arc<BoundaryQuadrature>) -> Self {
        self.terms.push(FieldTerm::Initial { f, quad: quad.clone() });
        self
    }

    /// Adds `a·SL[single] + b·DL[double]` on `mesh`.
    pub fn with_layers(
        mut self,
        mesh: &Arc<BoundaryMesh>,
        single: Option<(f64, Arc<SpaceTimeDensity>)>,
        double: Option<(f64, Arc<SpaceTimeDensity>)>,
    ) -> Result<Self> {
        for (_, d) in single.iter().chain(double.iter()) {
            if d.rows() != self.tg.steps() || d.cols() != mesh.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}×{} density", self.tg.steps(), mesh.len()),
                    found: format!("{}×{}", d.rows(), d.cols()),
                });
            }
        }
        self.terms.push(FieldTerm::Layers { mesh: mesh.clone(), single, double });
        Ok(self)
    }

    /// Adds the interior representation `SL[∂u/∂n] − DL[u]` of `traces` scaled by `alpha`.
    pub fn with_interior_reproduction(self, mesh: &Arc<BoundaryMesh>, traces: &TracePair, alpha: f64) -> Result<Self> {
        self.with_layers(
            mesh,
            Some((alpha, Arc::new(traces.neumann.clone()))),
            Some((-alpha, Arc::new(traces.dirichlet.clone()))),
        )
    }

    /// Adds the exterior representation `DL[v] − SL[∂v/∂n]` of `traces` scaled by `alpha`.
    pub fn with_exterior_reproduction(self, mesh: &Arc<BoundaryMesh>, traces: &TracePair, alpha: f64) -> Result<Self> {
        self.with_interior_reproduction(mesh, traces, -alpha)
    }

    fn check_compatible(&self, other: &FieldModel) -> Result<()> {
        if self.tg != other.tg || self.k != other.k {
            return Err(Error::InvalidArgument(
                "field models use different time grids or diffusivities".into(),
            ));
        }
        Ok(())
    }

    /// Sum of two models.
    pub fn plus(&self, other: &FieldModel) -> Result<Self> {
        self.check_compatible(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { terms, ..self.clone() })
    }

    /// The model multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                FieldTerm::Source(s) => FieldTerm::Source(PointSource { strength: s.strength * alpha, ..*s }),
                FieldTerm::Layers { mesh, single, double } => FieldTerm::Layers {
                    mesh: mesh.clone(),
                    single: single.as_ref().map(|(a, d)| (a * alpha, d.clone())),
                    double: double.as_ref().map(|(b, d)| (b * alpha, d.clone())),
                },
                FieldTerm::Initial { f, quad } => FieldTerm::Initial { f: f.scaled(alpha), quad: quad.clone() },
            })
            .collect();
        Self { terms, ..self.clone() }
    }

    /// Value at an arbitrary `(x, t)`.
    ///
    /// Layer terms use the density rows up to the step nearest `t`, so for `t`
    /// near a step `j·dt` this is the smooth heat solution whose value at `j·dt`
    /// matches the grid evaluation.
    pub fn value(&self, x: Vec2, t: f64) -> Result<f64> {
        self.value_with_rows(x, t, self.tg.rows_for_time(t))
    }

    /// `(∂u/∂t, kΔu)` at `(x, t)` by central differences with spatial step `h`
    /// and time step `ht`, holding the density rows fixed.
    pub fn heat_residual_parts(&self, x: Vec2, t: f64, h: f64, ht: f64) -> Result<(f64, f64)> {
        let rows = self.tg.rows_for_time(t);
        let f = |p: Vec2, s: f64| -> Result<f64> { self.value_with_rows(p, s, rows) };
        let ut = (f(x, t + ht)? - f(x, t - ht)?) / (2.0 * ht);
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let lap = (f(x + ex, t)? + f(x - ex, t)? + f(x + ey, t)? + f(x - ey, t)? - 4.0 * f(x, t)?) / (h * h);
        Ok((ut, self.k.get() * lap))
    }

    fn value_with_rows(&self, x: Vec2, t: f64, rows: usize) -> Result<f64> {
        let mut acc = 0.0;
        for term in &self.terms {
            acc += match term {
                FieldTerm::Source(s) => s.value(x, t, self.k),
                FieldTerm::Layers { mesh, single, double } => {
                    let src = LayerSource {
                        single: single.as_ref().map(|(a, d)| (*a, &**d)),
                        double: double.as_ref().map(|(b, d)| (*b, &**d)),
                    };
                    eval_layers_at(mesh, &src, x, t, rows, &self.tg, self.k)?
                }
                FieldTerm::Initial { f, quad } => boundary_form(f, quad, x, t, self.k)?,
            };
        }
        Ok(acc)
    }

    /// Values of several models at `targets` and evaluation `steps`:
    /// `out[model][step_index][target]`.
    ///
    /// Layer terms sharing a mesh (same `Arc`) are evaluated in one pass.
    pub fn evaluate(models: &[&FieldModel], targets: &[Vec2], steps: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut out = vec![vec![vec![0.0; targets.len()]; steps.len()]; models.len()];
        let Some(first) = models.first() else {
            return Ok(out);
        };
        for m in models {
            first.check_compatible(m)?;
        }
        let (tg, k) = (first.tg, first.k);
        for (mi, model) in models.iter().enumerate() {
            for term in &model.terms {
                match term {
                    FieldTerm::Source(s) => {
                        for (si, &j) in steps.iter().enumerate() {
                            let t = tg.eval_time(j);
                            for (ti, &x) in targets.iter().enumerate() {
                                out[mi][si][ti] += s.value(x, t, k);
                            }
                        }
                    }
                    FieldTerm::Initial { f, quad } => {
                        for (si, &j) in steps.iter().enumerate() {
                            let t = tg.eval_time(j);
                            for (ti, &x) in targets.iter().enumerate() {
                                out[mi][si][ti] += boundary_form(f, quad, x, t, k)?;
                            }
                        }
                    }
                    FieldTerm::Layers { .. } => {}
                }
            }
        }
        for (mesh, owners, sources) in group_layers(models) {
            let vals = eval_layers(&mesh, &sources, targets, &tg, steps, k)?;
            for (owner, v) in owners.into_iter().zip(vals) {
                for (si, row) in v.into_iter().enumerate() {
                    for (ti, val) in row.into_iter().enumerate() {
                        out[owner][si][ti] += val;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Spatial gradients of several models: `out[model][step_index][target]`.
    pub fn evaluate_gradient(
        models: &[&FieldModel],
        targets: &[Vec2],
        steps: &[usize],
    ) -> Result<Vec<Vec<Vec<Vec2>>>> {
        let mut out = vec![vec![vec![Vec2::zeros(); targets.len()]; steps.len()]; models.len()];
        let Some(first) = models.first() else {
            return Ok(out);
        };
        for m in models {
            first.check_compatible(m)?;
        }
        let (tg, k) = (first.tg, first.k);
        for (mi, model) in models.iter().enumerate() {
            for term in &model.terms {
                match term {
                    FieldTerm::Source(s) => {
                        for (si, &j) in steps.iter().enumerate() {
                            let t = tg.eval_time(j);
                            for (ti, &x) in targets.iter().enumerate() {
                                out[mi][si][ti] += s.gradient(x, t, k);
                            }
                        }
                    }
                    FieldTerm::Initial { f, quad } => {
                        for (si, &j) in steps.iter().enumerate() {
                            let t = tg.eval_time(j);
                            for (ti, &x) in targets.iter().enumerate() {
                                out[mi][si][ti] += boundary_form_gradient(f, quad, x, t, k)?;
                            }
                        }
                    }
                    FieldTerm::Layers { .. } => {}
                }
            }
        }
        for (mesh, owners, sources) in group_layers(models) {
            let vals = eval_layers_gradient(&mesh, &sources, targets, &tg, steps, k)?;
            for (owner, v) in owners.into_iter().zip(vals) {
                for (si, row) in v.into_iter().enumerate() {
                    for (ti, val) in row.into_iter().enumerate() {
                        out[owner][si][ti] += val;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Grids of several models at `steps`, sharing the geometry of `template`:
    /// `out[model][step_index]`.
    pub fn evaluate_grids(models: &[&FieldModel], template: &FieldGrid, steps: &[usize]) -> Result<Vec<Vec<FieldGrid>>> {
        let points = template.points();
        let values = Self::evaluate(models, &points, steps)?;
        let tg = models.first().map(|m| m.tg);
        values
            .into_iter()
            .map(|per_step| {
                per_step
                    .into_iter()
                    .zip(steps)
                    .map(|(v, &j)| template.with_values(v, tg.map_or(0.0, |tg| tg.eval_time(j))))
                    .collect()
            })
            .collect()
    }

    /// Dirichlet and Neumann traces of each model on `mesh` at the density
    /// sample times `(m + 1/2)·dt`.
    ///
    /// Point-source and initial terms are sampled exactly; layer terms are averaged over
    /// the neighbouring evaluation steps `m` and `m + 1` (the field is zero at step 0).
    pub fn midpoint_traces(models: &[&FieldModel], mesh: &BoundaryMesh) -> Result<Vec<TracePair>> {
        let Some(first) = models.first() else {
            return Ok(Vec::new());
        };
        let (tg, k) = (first.tg, first.k);
        let layer_only: Vec<FieldModel> = models
            .iter()
            .map(|m| FieldModel {
                terms: m.terms.iter().filter(|t| matches!(t, FieldTerm::Layers { .. })).cloned().collect(),
                ..(*m).clone()
            })
            .collect();
        let refs: Vec<&FieldModel> = layer_only.iter().collect();
        let steps: Vec<usize> = (1..=tg.steps()).collect();
        let vals = Self::evaluate(&refs, &mesh.centers, &steps)?;
        let grads = Self::evaluate_gradient(&refs, &mesh.centers, &steps)?;

        let n = mesh.len();
        let mut out = Vec::with_capacity(models.len());
        for (mi, model) in models.iter().enumerate() {
            let mut dirichlet = SpaceTimeDensity::zeros(tg.steps(), n);
            let mut neumann = SpaceTimeDensity::zeros(tg.steps(), n);
            for m in 0..tg.steps() {
                let tm = tg.density_time(m);
                for s in 0..n {
                    let x = mesh.centers[s];
                    let nrm = mesh.normals[s];
                    let (v0, g0) = if m == 0 {
                        (0.0, Vec2::zeros())
                    } else {
                        (vals[mi][m - 1][s], grads[mi][m - 1][s])
                    };
                    let mut v = 0.5 * (v0 + vals[mi][m][s]);
                    let mut g = (g0 + grads[mi][m][s]) * 0.5;
                    for term in &model.terms {
                        match term {
                            FieldTerm::Source(src) => {
                                v += src.value(x, tm, k);
                                g += src.gradient(x, tm, k);
                            }
                            FieldTerm::Initial { f, quad } => {
                                v += boundary_form(f, quad, x, tm, k)?;
                                g += boundary_form_gradient(f, quad, x, tm, k)?;
                            }
                            FieldTerm::Layers { .. } => {}
                        }
                    }
                    dirichlet.set(m, s, v);
                    neumann.set(m, s, g.dot(&nrm));
                }
            }
            out.push(TracePair { dirichlet, neumann });
        }
        Ok(out)
    }
}

type LayerGroup<'a> = (Arc<BoundaryMesh>, Vec<usize>, Vec<LayerSource<'a>>);

fn group_layers<'a>(models: &[&'a FieldModel]) -> Vec<LayerGroup<'a>> {
    let mut groups: Vec<LayerGroup<'a>> = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        for term in &model.terms {
            if let FieldTerm::Layers { mesh, single, double } = term {
                let src = LayerSource {
                    single: single.as_ref().map(|(a, d)| (*a, &**d)),
                    double: double.as_ref().map(|(b, d)| (*b, &**d)),
                };
                match groups.iter_mut().find(|g| Arc::ptr_eq(&g.0, mesh)) {
                    Some(g) => {
                        g.1.push(mi);
                        g.2.push(src);
                    }
                    None => groups.push((mesh.clone(), vec![mi], vec![src])),
                }
            }
        }
    }
    groups
}

/// Normalized heat-equation residual of `model` over `points` at time `t`:
/// `max |u_t − kΔu| / max (|u_t| + k|Δu|)`, the maxima taken over the points.
///
/// Steps: `h = ε^{1/4}·length_scale` in space, `ε^{1/3}·dt/2` in time.
pub fn heat_residual_ratio(model: &FieldModel, points: &[Vec2], t: f64, length_scale: f64) -> Result<(f64, f64)> {
    let h = math::powf(f64::EPSILON, 0.25) * length_scale;
    let ht = math::cbrt(f64::EPSILON) * 0.5 * model.time_grid().dt();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &x in points {
        let (ut, klap) = model.heat_residual_parts(x, t, h, ht)?;
        worst = worst.max((ut - klap).abs());
        scale = scale.max(ut.abs() + klap.abs());
    }
    Ok((worst, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, make_curve, uniform_grid, Rect, Shape};
    use crate::reproduction::point_source_traces;
    use crate::vec2;
    use approx::assert_relative_eq;

    fn setup() -> (Arc<BoundaryMesh>, TimeGrid, Diffusivity) {
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        (
            Arc::new(discretize(&c, 48).unwrap()),
            TimeGrid::from_final_time(0.1, 40).unwrap(),
            Diffusivity::new(0.3).unwrap(),
        )
    }

    #[test]
    fn grouped_evaluation_matches_point_evaluation() {
        let (mesh, tg, k) = setup();
        let src = PointSource::new(vec2(0.2, 0.3));
        let traces = point_source_traces(&src, &mesh, &tg, k).unwrap();
        let a = FieldModel::new(tg, k).with_interior_reproduction(&mesh, &traces, 1.0).unwrap();
        let b = FieldModel::new(tg, k).with_source(src).with_exterior_reproduction(&mesh, &traces, 2.0).unwrap();
        let targets = [vec2(0.5, 0.5), vec2(0.9, 0.9)];
        let steps = [10, 40];
        let vals = FieldModel::evaluate(&[&a, &b], &targets, &steps).unwrap();
        for (mi, m) in [&a, &b].iter().enumerate() {
            for (si, &j) in steps.iter().enumerate() {
                for (ti, &x) in targets.iter().enumerate() {
                    let v = m.value(x, tg.eval_time(j)).unwrap();
                    assert_relative_eq!(vals[mi][si][ti], v, max_relative = 1e-11, epsilon = 1e-14);
                }
            }
        }
        let sum = a.plus(&b.scaled(-0.5)).unwrap();
        let v = FieldModel::evaluate(&[&sum], &targets, &[40]).unwrap();
        let want = vals[0][1][0] - 0.5 * vals[1][1][0];
        assert_relative_eq!(v[0][0][0], want, max_relative = 1e-12);
    }

    #[test]
    fn grids_carry_time_and_geometry() {
        let (mesh, tg, k) = setup();
        let traces = point_source_traces(&PointSource::new(vec2(0.2, 0.3)), &mesh, &tg, k).unwrap();
        let a = FieldModel::new(tg, k).with_interior_reproduction(&mesh, &traces, 1.0).unwrap();
        let g = uniform_grid(Rect::unit_square(), 8, 8).unwrap();
        let grids = FieldModel::evaluate_grids(&[&a], &g, &[20, 40]).unwrap();
        assert_eq!(grids[0].len(), 2);
        assert_relative_eq!(grids[0][1].time, 0.1);
        assert!(grids[0][1].same_geometry(&g));
    }

    #[test]
    fn midpoint_traces_of_a_source_are_exact() {
        let (mesh, tg, k) = setup();
        let src = PointSource::new(vec2(0.2, 0.3));
        let model = FieldModel::new(tg, k).with_source(src);
        let traces = FieldModel::midpoint_traces(&[&model], &mesh).unwrap();
        assert_eq!(traces[0], point_source_traces(&src, &mesh, &tg, k).unwrap());
    }

    #[test]
    fn layer_fields_solve_the_heat_equation() {
        let (mesh, tg, k) = setup();
        let traces = point_source_traces(&PointSource::new(vec2(0.2, 0.3)), &mesh, &tg, k).unwrap();
        let model = FieldModel::new(tg, k).with_interior_reproduction(&mesh, &traces, 1.0).unwrap();
        let pts = [vec2(0.5, 0.5), vec2(0.6, 0.4), vec2(0.95, 0.9)];
        let (worst, scale) = heat_residual_ratio(&model, &pts, 0.05, (k.get() * tg.dt()).sqrt()).unwrap();
        assert!(worst <= 1e-3 * scale, "{worst} vs {scale}");
    }
}
