//! End-to-end experiments: field reproduction, cloaking and mimicking of point
//! sources and Dirichlet inclusions, and the harmonic initial-condition identity.
//!
//! A run evaluates every field on one uniform grid at the union of the snapshot
//! and metric times. Grids are emitted at the snapshot times; norms are Riemann
//! sums over the shrunken region `Ω₋` and the exterior of the grown region `Ω₊`.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::geometry::{
    discretize, make_curve, region_mask, uniform_grid, BoundaryMesh, ClosedCurve, FieldGrid, Rect,
    RegionMask, Shape,
};
use crate::initial::{BoundaryQuadrature, HarmonicPolynomial};
use crate::kernel::Diffusivity;
use crate::potentials::{SpaceTimeDensity, TimeGrid};
use crate::reproduction::{perturb_density, reproduction_errors, PointSource, ReproductionMode, TracePair};
use crate::scattering::{scattered_model, solve_dirichlet_density, DirichletInclusion, IncidentData};
use crate::{vec2, Vec2};

/// The experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    ReproduceInterior,
    ReproduceExterior,
    CloakSource,
    CloakObject,
    MimicSource,
    MimicObject,
    HarmonicIdentity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::ReproduceInterior,
        ScenarioKind::ReproduceExterior,
        ScenarioKind::CloakSource,
        ScenarioKind::CloakObject,
        ScenarioKind::MimicSource,
        ScenarioKind::MimicObject,
        ScenarioKind::HarmonicIdentity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ReproduceInterior => "reproduce_interior",
            ScenarioKind::ReproduceExterior => "reproduce_exterior",
            ScenarioKind::CloakSource => "cloak_source",
            ScenarioKind::CloakObject => "cloak_object",
            ScenarioKind::MimicSource => "mimic_source",
            ScenarioKind::MimicObject => "mimic_object",
            ScenarioKind::HarmonicIdentity => "harmonic_identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Uniform evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub bbox: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn unit_square(n: usize) -> Self {
        Self { bbox: Rect::unit_square(), nx: n, ny: n }
    }
}

/// Per-step Gaussian perturbation of the boundary densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation as a fraction of each density row's 2-norm.
    pub fraction: f64,
    pub seed: u64,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub diffusivity: f64,
    pub final_time: f64,
    pub steps: usize,
    /// The cloaking (or reproduction) curve `∂Ω`.
    pub cloak: Shape,
    pub cloak_segments: usize,
    /// Relative buffer `s`: metrics use `Ω₋ = (1 − s)Ω` and the exterior of `(1 + s)Ω`.
    pub buffer: f64,
    /// The object `R` of the object scenarios.
    pub inclusion: Option<Shape>,
    /// The stand-in object `S` that `R` is made to look like.
    pub stand_in: Option<Shape>,
    pub inclusion_segments: usize,
    /// Dirichlet value held on `R` and `S`; nonzero makes the object active.
    pub object_value: f64,
    /// Sources `f` (or the probing sources of the object scenarios).
    pub sources: Vec<PointSource>,
    /// Sources `g` that `f` is made to look like.
    pub mimic_sources: Vec<PointSource>,
    pub grid: GridSpec,
    /// Times of the emitted grids.
    pub snapshots: Vec<f64>,
    /// Times of the metric series.
    pub metric_times: Vec<f64>,
    pub noise: Option<NoiseSpec>,
    /// Outward offset, as a fraction of the diameter of `Ω`, of the points where
    /// the stand-in's scattered field is sampled on `∂Ω`.
    pub stand_in_offset: f64,
    pub initial: Option<HarmonicPolynomial>,
    /// Evaluation points of the harmonic identity.
    pub sample_points: Vec<Vec2>,
    /// Labels of parameters that were chosen rather than given.
    pub chosen: Vec<String>,
}

impl ScenarioConfig {
    /// A configuration with neutral defaults: `k = 0.2`, 200 steps on `[0, 0.2]`,
    /// 128 segments, `s = 0.05`, a 100×100 grid of the unit square.
    pub fn new(kind: ScenarioKind, cloak: Shape) -> Self {
        Self {
            kind,
            diffusivity: 0.2,
            final_time: 0.2,
            steps: 200,
            cloak,
            cloak_segments: 128,
            buffer: 0.05,
            inclusion: None,
            stand_in: None,
            inclusion_segments: 64,
            object_value: 0.0,
            sources: Vec::new(),
            mimic_sources: Vec::new(),
            grid: GridSpec::unit_square(100),
            snapshots: vec![0.2],
            metric_times: vec![0.2],
            noise: None,
            stand_in_offset: 1e-3,
            initial: None,
            sample_points: Vec::new(),
            chosen: Vec::new(),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_final_time(self.final_time, self.steps)
    }

    /// Checks parameter ranges, required fields and geometric containment.
    pub fn validate(&self) -> Result<()> {
        Diffusivity::new(self.diffusivity)?;
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::NonPositiveTime(self.final_time));
        }
        let tg = self.time_grid()?;
        for &t in self.snapshots.iter().chain(&self.metric_times) {
            if tg.step_at(t)? == 0 {
                return Err(Error::InvalidArgument(format!("output time {t} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.buffer) {
            return Err(Error::InvalidArgument(format!("buffer must lie in [0, 1), got {}", self.buffer)));
        }
        if self.grid.nx < 3 || self.grid.ny < 3 || !(self.grid.bbox.width() > 0.0 && self.grid.bbox.height() > 0.0) {
            return Err(Error::InvalidArgument("grid must have at least 3×3 cells and a positive extent".into()));
        }
        if let Some(n) = self.noise {
            if !(n.fraction >= 0.0 && n.fraction.is_finite()) {
                return Err(Error::InvalidArgument(format!("noise fraction must be >= 0, got {}", n.fraction)));
            }
        }
        if !(self.stand_in_offset >= 0.0) {
            return Err(Error::InvalidArgument("stand-in offset must be >= 0".into()));
        }
        if !self.object_value.is_finite() {
            return Err(Error::InvalidArgument("object value must be finite".into()));
        }
        let cloak = make_curve(self.cloak)?;
        if self.cloak_segments < crate::geometry::MIN_SEGMENTS {
            return Err(Error::InvalidArgument(format!(
                "cloak needs at least {} segments, got {}",
                crate::geometry::MIN_SEGMENTS,
                self.cloak_segments
            )));
        }
        let inside = |p: Vec2| cloak.contains(p) && cloak.distance(p) > 0.0;
        let outside = |p: Vec2| !cloak.contains(p) && cloak.distance(p) > 0.0;
        let need_sources = |srcs: &[PointSource], what: &str| -> Result<()> {
            if srcs.is_empty() {
                return Err(Error::InvalidArgument(format!("{} needs at least one {what}", self.kind.name())));
            }
            Ok(())
        };
        let check = |srcs: &[PointSource], want_inside: bool, what: &str| -> Result<()> {
            for (i, s) in srcs.iter().enumerate() {
                let ok = if want_inside { inside(s.location) } else { outside(s.location) };
                if !ok {
                    return Err(Error::Containment(format!(
                        "{what} {i} at ({}, {}) must lie {} the cloak curve",
                        s.location.x,
                        s.location.y,
                        if want_inside { "strictly inside" } else { "strictly outside" }
                    )));
                }
            }
            Ok(())
        };
        let object = |shape: Option<Shape>, what: &str| -> Result<ClosedCurve> {
            let shape = shape.ok_or_else(|| Error::InvalidArgument(format!("{} needs {what}", self.kind.name())))?;
            let c = make_curve(shape)?;
            if !cloak.encloses(&c, 0.0) {
                return Err(Error::Containment(format!("{what} must lie strictly inside the cloak curve")));
            }
            Ok(c)
        };
        match self.kind {
            ScenarioKind::ReproduceInterior => {
                need_sources(&self.sources, "source")?;
                check(&self.sources, false, "source")?;
            }
            ScenarioKind::ReproduceExterior | ScenarioKind::CloakSource => {
                need_sources(&self.sources, "source")?;
                check(&self.sources, true, "source")?;
            }
            ScenarioKind::MimicSource => {
                need_sources(&self.sources, "source")?;
                need_sources(&self.mimic_sources, "mimicked source")?;
                check(&self.sources, true, "source")?;
                check(&self.mimic_sources, true, "mimicked source")?;
            }
            ScenarioKind::CloakObject | ScenarioKind::MimicObject => {
                need_sources(&self.sources, "source")?;
                check(&self.sources, false, "source")?;
                let mut objects = Vec::new();
                if self.kind == ScenarioKind::MimicObject || self.inclusion.is_some() {
                    objects.push(object(self.inclusion, "an inclusion")?);
                }
                if self.kind == ScenarioKind::MimicObject {
                    objects.push(object(self.stand_in, "a stand-in object")?);
                }
                if self.inclusion_segments < crate::geometry::MIN_SEGMENTS {
                    return Err(Error::InvalidArgument(format!(
                        "objects need at least {} segments",
                        crate::geometry::MIN_SEGMENTS
                    )));
                }
                for c in &objects {
                    if !c.is_star_shaped() {
                        return Err(Error::Geometry("objects must be star-shaped about their centroids".into()));
                    }
                }
            }
            ScenarioKind::HarmonicIdentity => {
                if self.initial.is_none() {
                    return Err(Error::InvalidArgument("harmonic_identity needs an initial polynomial".into()));
                }
                if self.sample_points.is_empty() {
                    return Err(Error::InvalidArgument("harmonic_identity needs sample points".into()));
                }
                if matches!(self.cloak, Shape::Kite { .. }) {
                    return Err(Error::InvalidArgument(
                        "harmonic_identity needs a curve in polar form (circle or flower)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Grids of one named field at the snapshot times.
#[derive(Debug, Clone)]
pub struct FieldSeries {
    pub name: String,
    pub grids: Vec<FieldGrid>,
}

/// Values of one named metric at the metric times.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// One evaluation of the harmonic identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySample {
    pub point: Vec2,
    /// `∫_Ω f K dy` by volume quadrature.
    pub volume: f64,
    /// The same integral written on `∂Ω` with `φ`.
    pub boundary: f64,
}

/// Discretization and solver diagnostics of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetadata {
    pub dt: f64,
    pub steps: usize,
    pub cloak_segments: usize,
    pub inclusion_segments: Option<usize>,
    /// 1-norm condition numbers of the first single-layer blocks, by solve.
    pub conditions: Vec<(String, f64)>,
    /// Relative algebraic residuals of the block solves.
    pub solve_residuals: Vec<(String, f64)>,
    pub wall_seconds: Option<f64>,
    pub chosen: Vec<String>,
    pub warnings: Vec<String>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub kind: ScenarioKind,
    pub snapshot_times: Vec<f64>,
    pub metric_times: Vec<f64>,
    pub fields: Vec<FieldSeries>,
    pub metrics: Vec<MetricSeries>,
    /// The field model behind each emitted series, by series name.
    pub models: Vec<(String, FieldModel)>,
    pub identity: Vec<IdentitySample>,
    pub metadata: RunMetadata,
}

impl ScenarioResult {
    pub fn field(&self, name: &str) -> Option<&FieldSeries> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn model(&self, name: &str) -> Option<&FieldModel> {
        self.models.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Runs the experiment described by `cfg`.
pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();
    cfg.validate()?;
    let mut result = match cfg.kind {
        ScenarioKind::ReproduceInterior => run_reproduce(cfg, ReproductionMode::Interior),
        ScenarioKind::ReproduceExterior => run_reproduce(cfg, ReproductionMode::Exterior),
        ScenarioKind::CloakSource => run_cloak_source(cfg),
        ScenarioKind::CloakObject => run_cloak_object(cfg),
        ScenarioKind::MimicSource => run_mimic_source(cfg),
        ScenarioKind::MimicObject => run_mimic_object(cfg),
        ScenarioKind::HarmonicIdentity => run_harmonic_identity(cfg),
    }?;
    #[cfg(feature = "std")]
    {
        result.metadata.wall_seconds = Some(start.elapsed().as_secs_f64());
    }
    result.metadata.chosen = cfg.chosen.clone();
    Ok(result)
}

/// Shared discretization of a run.
struct Setup {
    k: Diffusivity,
    tg: TimeGrid,
    cloak: ClosedCurve,
    mesh: Arc<BoundaryMesh>,
    grid: FieldGrid,
    inner: RegionMask,
    outer: RegionMask,
    /// Sorted union of snapshot and metric steps.
    steps: Vec<usize>,
    snap_idx: Vec<usize>,
    metric_idx: Vec<usize>,
}

impl Setup {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let k = Diffusivity::new(cfg.diffusivity)?;
        let tg = cfg.time_grid()?;
        let cloak = make_curve(cfg.cloak)?;
        let mesh = Arc::new(discretize(&cloak, cfg.cloak_segments)?);
        let grid = uniform_grid(cfg.grid.bbox, cfg.grid.nx, cfg.grid.ny)?;
        let inner = region_mask(&grid, &cloak, -cfg.buffer)?;
        let outer = region_mask(&grid, &cloak, cfg.buffer)?.complement();
        let snap: Vec<usize> = cfg.snapshots.iter().map(|&t| tg.step_at(t)).collect::<Result<_>>()?;
        let metric: Vec<usize> = cfg.metric_times.iter().map(|&t| tg.step_at(t)).collect::<Result<_>>()?;
        let mut steps: Vec<usize> = snap.iter().chain(&metric).copied().collect();
        steps.sort_unstable();
        steps.dedup();
        let pos = |j: &usize| steps.binary_search(j).unwrap_or(0);
        let snap_idx = snap.iter().map(pos).collect();
        let metric_idx = metric.iter().map(pos).collect();
        Ok(Self { k, tg, cloak, mesh, grid, inner, outer, steps, snap_idx, metric_idx })
    }

    /// Grids of each model at `self.steps`.
    fn grids(&self, models: &[&FieldModel]) -> Result<Vec<Vec<FieldGrid>>> {
        FieldModel::evaluate_grids(models, &self.grid, &self.steps)
    }

    fn snapshots(&self, name: &str, grids: &[FieldGrid]) -> FieldSeries {
        FieldSeries { name: name.to_string(), grids: self.snap_idx.iter().map(|&i| grids[i].clone()).collect() }
    }

    fn model(&self) -> FieldModel {
        FieldModel::new(self.tg, self.k)
    }

    fn metadata(&self, cfg: &ScenarioConfig) -> RunMetadata {
        RunMetadata {
            dt: self.tg.dt(),
            steps: self.tg.steps(),
            cloak_segments: cfg.cloak_segments,
            ..RunMetadata::default()
        }
    }

    /// Traces of `model` on `∂Ω`, perturbed when noise is configured.
    fn traces(&self, model: &FieldModel, noise: Option<NoiseSpec>) -> Result<TracePair> {
        let t = FieldModel::midpoint_traces(&[model], &self.mesh)?.remove(0);
        perturb(t, noise)
    }
}

fn perturb(t: TracePair, noise: Option<NoiseSpec>) -> Result<TracePair> {
    match noise {
        Some(n) if n.fraction > 0.0 => Ok(TracePair {
            dirichlet: perturb_density(&t.dirichlet, n.fraction, n.seed)?,
            neumann: perturb_density(&t.neumann, n.fraction, n.seed.wrapping_add(1))?,
        }),
        _ => Ok(t),
    }
}

fn sources_model(base: FieldModel, sources: &[PointSource]) -> FieldModel {
    sources.iter().fold(base, |m, s| m.with_source(*s))
}

/// `num/den`; a vanishing reference yields the absolute value and a warning.
fn ratio(num: f64, den: f64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        let w = format!("{what}: reference norm vanishes, reporting the absolute norm");
        if !warnings.contains(&w) {
            warnings.push(w);
        }
        return num;
    }
    num / den
}

fn metric(name: &str, values: Vec<f64>) -> MetricSeries {
    MetricSeries { name: name.to_string(), values }
}

fn diff(a: &FieldGrid, b: &FieldGrid) -> Result<FieldGrid> {
    a.zip_with(b, |x, y| x - y)
}

/// Sets cells inside any of `curves` to NaN.
fn blank_inside(grid: &FieldGrid, curves: &[&ClosedCurve]) -> FieldGrid {
    let pts = grid.points();
    let values = grid
        .values
        .iter()
        .zip(&pts)
        .map(|(&v, &p)| if curves.iter().any(|c| c.contains(p)) { f64::NAN } else { v })
        .collect();
    FieldGrid { values, ..grid.clone() }
}

fn run_reproduce(cfg: &ScenarioConfig, mode: ReproductionMode) -> Result<ScenarioResult> {
    let su = Setup::new(cfg)?;
    let reference = sources_model(su.model(), &cfg.sources);
    let traces = su.traces(&reference, cfg.noise)?;
    let reproduced = match mode {
        ReproductionMode::Interior => su.model().with_interior_reproduction(&su.mesh, &traces, 1.0)?,
        ReproductionMode::Exterior => su.model().with_exterior_reproduction(&su.mesh, &traces, 1.0)?,
    };
    let grids = su.grids(&[&reference, &reproduced])?;
    let pts = su.grid.points();
    let expected = |g: &FieldGrid| -> FieldGrid {
        let values = g
            .values
            .iter()
            .zip(&pts)
            .map(|(&v, &p)| if su.cloak.contains(p) == (mode == ReproductionMode::Interior) { v } else { 0.0 })
            .collect();
        FieldGrid { values, ..g.clone() }
    };
    let errors: Vec<FieldGrid> = grids[0]
        .iter()
        .zip(&grids[1])
        .map(|(r, u)| u.zip_with(&expected(r), |a, b| (a - b).abs()))
        .collect::<Result<_>>()?;

    let mut series: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for &i in &su.metric_idx {
        let e = reproduction_errors(&grids[1][i], &grids[0][i], &su.inner, &su.outer, mode)?;
        match mode {
            ReproductionMode::Interior => {
                series[0].push(e.relerr_minus.unwrap_or(f64::NAN));
                series[1].push(e.err_plus.unwrap_or(f64::NAN));
            }
            ReproductionMode::Exterior => {
                series[0].push(e.err_minus.unwrap_or(f64::NAN));
                series[1].push(e.relerr_plus.unwrap_or(f64::NAN));
            }
        }
    }
    let [a, b] = series;
    let metrics = match mode {
        ReproductionMode::Interior => vec![metric("relerr_minus", a), metric("err_plus", b)],
        ReproductionMode::Exterior => vec![metric("err_minus", a), metric("relerr_plus", b)],
    };
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: cfg.snapshots.clone(),
        metric_times: cfg.metric_times.clone(),
        fields: vec![
            su.snapshots("reference", &grids[0]),
            su.snapshots("reproduced", &grids[1]),
            su.snapshots("error", &errors),
        ],
        metrics,
        models: vec![("reference".into(), reference), ("reproduced".into(), reproduced)],
        identity: Vec::new(),
        metadata: su.metadata(cfg),
    })
}

/// Cancels the field of sources inside `Ω` everywhere outside it.
pub fn run_cloak_source(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let su = Setup::new(cfg)?;
    let incident = sources_model(su.model(), &cfg.sources);
    let traces = su.traces(&incident, cfg.noise)?;
    let cloaking = su.model().with_exterior_reproduction(&su.mesh, &traces, -1.0)?;
    let total = incident.plus(&cloaking)?;
    let grids = su.grids(&[&incident, &cloaking, &total])?;
    let mut md = su.metadata(cfg);
    let (mut ext, mut rel, mut int) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &su.metric_idx {
        let (vi, vt) = (&grids[0][i], &grids[2][i]);
        let e = vt.l2_norm(&su.outer);
        ext.push(e);
        rel.push(ratio(e, vi.l2_norm(&su.outer), "exterior_relative", &mut md.warnings));
        int.push(ratio(diff(vt, vi)?.l2_norm(&su.inner), vi.l2_norm(&su.inner), "interior_relerr", &mut md.warnings));
    }
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: cfg.snapshots.clone(),
        metric_times: cfg.metric_times.clone(),
        fields: vec![
            su.snapshots("incident", &grids[0]),
            su.snapshots("cloaking", &grids[1]),
            su.snapshots("total", &grids[2]),
        ],
        metrics: vec![metric("exterior_total", ext), metric("exterior_relative", rel), metric("interior_relerr", int)],
        models: vec![("incident".into(), incident), ("cloaking".into(), cloaking), ("total".into(), total)],
        identity: Vec::new(),
        metadata: md,
    })
}

/// Scattered field of `inclusion` held at `object_value` and driven by `driving`.
fn scatter(
    su: &Setup,
    inclusion: &DirichletInclusion,
    driving: &FieldModel,
    object_value: f64,
    label: &str,
    md: &mut RunMetadata,
) -> Result<FieldModel> {
    let data = IncidentData::from_model(driving, &inclusion.mesh)?.relative_to(object_value);
    let sol = solve_dirichlet_density(inclusion, &data, &su.tg, su.k)?;
    md.conditions.push((label.to_string(), sol.condition));
    md.solve_residuals.push((label.to_string(), sol.residual));
    scattered_model(inclusion, &data.dirichlet, &sol.psi, su.tg, su.k)
}

/// The interior cloak `−u_i` inside `Ω`, plus the constant state `c` for an
/// object held at temperature `c`.
fn interior_cloak(su: &Setup, incident: &FieldModel, c: f64, noise: Option<NoiseSpec>) -> Result<FieldModel> {
    let traces = su.traces(incident, noise)?;
    let mut cloak = su.model().with_interior_reproduction(&su.mesh, &traces, -1.0)?;
    if c != 0.0 {
        // c·1_Ω = ∫_Ω c K dy − DL[c]: the free evolution of the initial state c
        // minus the double layer of the constant trace.
        let quad = Arc::new(BoundaryQuadrature::from_mesh(&su.mesh));
        let constant = SpaceTimeDensity::from_fn(su.tg.steps(), su.mesh.len(), |_, _| c);
        cloak = cloak
            .with_initial(HarmonicPolynomial::constant(c)?, &quad)
            .with_layers(&su.mesh, None, Some((-1.0, Arc::new(constant))))?;
    }
    Ok(cloak)
}

/// Hides a Dirichlet inclusion `R ⊂ Ω` from a probing field generated outside `Ω`.
pub fn run_cloak_object(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let su = Setup::new(cfg)?;
    let r_curve = cfg.inclusion.map(make_curve).transpose()?;
    let inclusion = r_curve.as_ref().map(|c| DirichletInclusion::new(c, cfg.inclusion_segments)).transpose()?;
    let mut md = su.metadata(cfg);
    md.inclusion_segments = inclusion.as_ref().map(|_| cfg.inclusion_segments);
    let c = cfg.object_value;
    if c != 0.0 {
        md.warnings.push(format!("object held at {c}: the cloak adds the constant state {c} inside the cloak curve"));
    }

    let incident = sources_model(su.model(), &cfg.sources);
    let cloaking = interior_cloak(&su, &incident, c, cfg.noise)?;
    let driving = incident.plus(&cloaking)?;
    let (scattered_uncloaked, scattered_cloaked) = match &inclusion {
        Some(r) => (
            scatter(&su, r, &incident, c, "uncloaked", &mut md)?,
            scatter(&su, r, &driving, c, "cloaked", &mut md)?,
        ),
        None => (su.model(), su.model()),
    };
    let total_uncloaked = incident.plus(&scattered_uncloaked)?;
    let total_cloaked = driving.plus(&scattered_cloaked)?;

    let grids = su.grids(&[&incident, &cloaking, &scattered_uncloaked, &scattered_cloaked])?;
    let objects: Vec<&ClosedCurve> = r_curve.iter().collect();
    let mut totals: Vec<(FieldGrid, FieldGrid, FieldGrid)> = Vec::new();
    let mut series: Vec<Vec<FieldGrid>> = vec![Vec::new(); 4];
    for i in 0..su.steps.len() {
        let (ui, uc, us, usc) = (&grids[0][i], &grids[1][i], &grids[2][i], &grids[3][i]);
        let tot_u = ui.zip_with(us, |a, b| a + b)?;
        let drive = ui.zip_with(uc, |a, b| a + b)?;
        let tot_c = drive.zip_with(usc, |a, b| a + b)?;
        series[0].push(blank_inside(us, &objects));
        series[1].push(blank_inside(usc, &objects));
        series[2].push(blank_inside(&tot_u, &objects));
        series[3].push(blank_inside(&tot_c, &objects));
        totals.push((tot_u, drive, tot_c));
    }
    let (mut ratio_s, mut deviation, mut interior) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &su.metric_idx {
        let (ui, us, usc) = (&grids[0][i], &grids[2][i], &grids[3][i]);
        let (_, drive, tot_c) = &totals[i];
        let norm_us = us.l2_norm(&su.outer);
        ratio_s.push(ratio(usc.l2_norm(&su.outer), norm_us, "scattered_ratio", &mut md.warnings));
        deviation.push(ratio(diff(tot_c, ui)?.l2_norm(&su.outer), norm_us, "exterior_deviation", &mut md.warnings));
        let target = ui.map(|_| c);
        interior.push(ratio(diff(drive, &target)?.l2_norm(&su.inner), ui.l2_norm(&su.inner), "interior_residual", &mut md.warnings));
    }
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: cfg.snapshots.clone(),
        metric_times: cfg.metric_times.clone(),
        fields: vec![
            su.snapshots("incident", &grids[0]),
            su.snapshots("cloaking", &grids[1]),
            su.snapshots("scattered_uncloaked", &series[0]),
            su.snapshots("scattered_cloaked", &series[1]),
            su.snapshots("total_uncloaked", &series[2]),
            su.snapshots("total_cloaked", &series[3]),
        ],
        metrics: vec![
            metric("scattered_ratio", ratio_s),
            metric("exterior_deviation", deviation),
            metric("interior_residual", interior),
        ],
        models: vec![
            ("incident".into(), incident),
            ("cloaking".into(), cloaking),
            ("scattered_uncloaked".into(), scattered_uncloaked),
            ("scattered_cloaked".into(), scattered_cloaked),
            ("total_uncloaked".into(), total_uncloaked),
            ("total_cloaked".into(), total_cloaked),
        ],
        identity: Vec::new(),
        metadata: md,
    })
}

/// Makes sources `f` inside `Ω` look like sources `g` from outside `Ω`.
pub fn run_mimic_source(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let su = Setup::new(cfg)?;
    let vf = sources_model(su.model(), &cfg.sources);
    let vg = sources_model(su.model(), &cfg.mimic_sources);
    let traces = su.traces(&vg.plus(&vf.scaled(-1.0))?, cfg.noise)?;
    let cloaking = su.model().with_exterior_reproduction(&su.mesh, &traces, 1.0)?;
    let mimicked = vf.plus(&cloaking)?;
    let grids = su.grids(&[&vf, &vg, &cloaking, &mimicked])?;
    let mut md = su.metadata(cfg);
    let errors: Vec<FieldGrid> =
        grids[3].iter().zip(&grids[1]).map(|(m, g)| m.zip_with(g, |a, b| (a - b).abs())).collect::<Result<_>>()?;
    let mut mismatch = Vec::new();
    for &i in &su.metric_idx {
        let g = &grids[1][i];
        mismatch.push(ratio(errors[i].l2_norm(&su.outer), g.l2_norm(&su.outer), "mismatch", &mut md.warnings));
    }
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: cfg.snapshots.clone(),
        metric_times: cfg.metric_times.clone(),
        fields: vec![
            su.snapshots("source_f", &grids[0]),
            su.snapshots("source_g", &grids[1]),
            su.snapshots("cloaking", &grids[2]),
            su.snapshots("mimicked", &grids[3]),
            su.snapshots("error", &errors),
        ],
        metrics: vec![metric("mismatch", mismatch)],
        models: vec![
            ("source_f".into(), vf),
            ("source_g".into(), vg),
            ("cloaking".into(), cloaking),
            ("mimicked".into(), mimicked),
        ],
        identity: Vec::new(),
        metadata: md,
    })
}

/// Makes a Dirichlet inclusion `R` look like a different inclusion `S`.
pub fn run_mimic_object(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let su = Setup::new(cfg)?;
    let missing = |w: &str| Error::InvalidArgument(format!("missing {w}"));
    let r_curve = make_curve(cfg.inclusion.ok_or_else(|| missing("inclusion"))?)?;
    let s_curve = make_curve(cfg.stand_in.ok_or_else(|| missing("stand-in object"))?)?;
    let object = DirichletInclusion::new(&r_curve, cfg.inclusion_segments)?;
    let stand_in = DirichletInclusion::new(&s_curve, cfg.inclusion_segments)?;
    let mut md = su.metadata(cfg);
    md.inclusion_segments = Some(cfg.inclusion_segments);
    let c = cfg.object_value;

    let incident = sources_model(su.model(), &cfg.sources);
    let scattered_stand_in = scatter(&su, &stand_in, &incident, c, "stand_in", &mut md)?;
    let scattered_object = scatter(&su, &object, &incident, c, "object", &mut md)?;

    // Traces of the stand-in's field on ∂Ω, optionally sampled slightly outside.
    let sample_mesh = if cfg.stand_in_offset > 0.0 {
        let d = cfg.stand_in_offset * su.cloak.diameter();
        let mut m = (*su.mesh).clone();
        for (p, n) in m.centers.iter_mut().zip(&su.mesh.normals) {
            *p += n * d;
        }
        m
    } else {
        (*su.mesh).clone()
    };
    let stand_in_traces = perturb(
        FieldModel::midpoint_traces(&[&scattered_stand_in], &sample_mesh)?.remove(0),
        cfg.noise.map(|n| NoiseSpec { seed: n.seed.wrapping_add(2), ..n }),
    )?;
    let cloaking = interior_cloak(&su, &incident, c, cfg.noise)?
        .with_exterior_reproduction(&su.mesh, &stand_in_traces, 1.0)?;
    let driving = incident.plus(&cloaking)?;
    let scattered_cloaked = scatter(&su, &object, &driving, c, "mimicked", &mut md)?;
    let mimicked = cloaking.plus(&scattered_cloaked)?;

    let grids = su.grids(&[&scattered_object, &scattered_stand_in, &mimicked, &cloaking])?;
    let (r_only, s_only) = ([&r_curve], [&s_curve]);
    let mut mismatch = Vec::new();
    let mut raw = Vec::new();
    for &i in &su.metric_idx {
        let vs = &grids[1][i];
        let ref_norm = vs.l2_norm(&su.outer);
        mismatch.push(ratio(diff(&grids[2][i], vs)?.l2_norm(&su.outer), ref_norm, "mismatch", &mut md.warnings));
        raw.push(ratio(diff(&grids[0][i], vs)?.l2_norm(&su.outer), ref_norm, "raw_mismatch", &mut md.warnings));
    }
    let blank = |gs: &[FieldGrid], cs: &[&ClosedCurve]| -> Vec<FieldGrid> { gs.iter().map(|g| blank_inside(g, cs)).collect() };
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: cfg.snapshots.clone(),
        metric_times: cfg.metric_times.clone(),
        fields: vec![
            su.snapshots("scattered_object", &blank(&grids[0], &r_only)),
            su.snapshots("scattered_stand_in", &blank(&grids[1], &s_only)),
            su.snapshots("mimicked", &blank(&grids[2], &r_only)),
            su.snapshots("cloaking", &grids[3]),
        ],
        metrics: vec![metric("mismatch", mismatch), metric("raw_mismatch", raw)],
        models: vec![
            ("scattered_object".into(), scattered_object),
            ("scattered_stand_in".into(), scattered_stand_in),
            ("mimicked".into(), mimicked),
            ("cloaking".into(), cloaking),
        ],
        identity: Vec::new(),
        metadata: md,
    })
}

fn run_harmonic_identity(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let f = cfg.initial.ok_or_else(|| Error::InvalidArgument("missing initial polynomial".into()))?;
    let curve = make_curve(cfg.cloak)?;
    let k = Diffusivity::new(cfg.diffusivity)?;
    let samples = verify_harmonic_identity(&f, &curve, cfg.cloak_segments, &cfg.sample_points, cfg.final_time, k)?;
    let worst = samples.iter().fold(0.0f64, |m, s| m.max((s.volume - s.boundary).abs()));
    let tg = cfg.time_grid()?;
    Ok(ScenarioResult {
        kind: cfg.kind,
        snapshot_times: Vec::new(),
        metric_times: vec![cfg.final_time],
        fields: Vec::new(),
        metrics: vec![metric("max_abs_difference", vec![worst])],
        models: Vec::new(),
        identity: samples,
        metadata: RunMetadata {
            dt: tg.dt(),
            steps: tg.steps(),
            cloak_segments: cfg.cloak_segments,
            ..RunMetadata::default()
        },
    })
}

/// Both sides of `∫_Ω f K(x − y, t) dy = ∫_∂Ω (φ ∂f/∂n − f ∂φ/∂n) dS_y` at each
/// point: adaptive volume quadrature against the trapezoidal rule with `nodes` nodes.
#[cfg(feature = "std")]
pub fn verify_harmonic_identity(
    f: &HarmonicPolynomial,
    curve: &ClosedCurve,
    nodes: usize,
    points: &[Vec2],
    t: f64,
    k: Diffusivity,
) -> Result<Vec<IdentitySample>> {
    let quad = BoundaryQuadrature::from_curve(curve, nodes)?;
    points
        .iter()
        .map(|&x| {
            Ok(IdentitySample {
                point: x,
                volume: crate::initial::volume_integral(f, curve, x, t, k, 1e-13)?,
                boundary: crate::initial::boundary_form(f, &quad, x, t, k)?,
            })
        })
        .collect()
}

#[cfg(not(feature = "std"))]
pub fn verify_harmonic_identity(
    _f: &HarmonicPolynomial,
    _curve: &ClosedCurve,
    _nodes: usize,
    _points: &[Vec2],
    _t: f64,
    _k: Diffusivity,
) -> Result<Vec<IdentitySample>> {
    Err(Error::InvalidArgument("the volume quadrature oracle needs the std feature".into()))
}

/// Figures with presets.
pub const FIGURES: [u32; 8] = [3, 4, 7, 8, 9, 10, 11, 12];

fn unit_disk_quarter() -> Shape {
    Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }
}

fn times(from_step: usize, to_step: usize, stride: usize, dt: f64) -> Vec<f64> {
    (from_step..=to_step).step_by(stride).map(|j| j as f64 * dt).collect()
}

fn reproduction_preset(kind: ScenarioKind, source: Vec2, k: f64, segments: usize, steps: usize, final_time: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(kind, unit_disk_quarter());
    c.diffusivity = k;
    c.cloak_segments = segments;
    c.steps = steps;
    c.final_time = final_time;
    c.sources = vec![PointSource::new(source)];
    c
}

/// The runs behind one figure, with every stated parameter hard-coded and the
/// unstated ones listed in `chosen`.
pub fn figure_preset(fig: u32) -> Result<Vec<ScenarioConfig>> {
    match fig {
        3 | 4 => {
            // 200 steps on [0, 0.2], continued with the same step to 0.3 for
            // the maximum-error window [0.2, 0.3].
            let (kind, src) = if fig == 3 {
                (ScenarioKind::ReproduceInterior, vec2(0.25, 0.25))
            } else {
                (ScenarioKind::ReproduceExterior, vec2(0.5, 0.55))
            };
            let mut c = reproduction_preset(kind, src, 0.3, 128, 300, 0.3);
            c.grid = GridSpec::unit_square(200);
            c.snapshots = times(200, 295, 5, 1e-3);
            c.metric_times = c.snapshots.clone();
            c.chosen = vec![
                "grid 200x200".into(),
                "window snapshots every 5 steps on [0.2, 0.295]".into(),
            ];
            Ok(vec![c])
        }
        7 | 8 | 9 => {
            let variants: Vec<(usize, usize, Option<NoiseSpec>)> = match fig {
                7 => [25, 50, 100].iter().map(|&n| (n, 1000, None)).collect(),
                8 => [250, 500, 1000].iter().map(|&m| (100, m, None)).collect(),
                _ => vec![(100, 1000, None), (100, 1000, Some(NoiseSpec { fraction: 0.03, seed: 7 }))],
            };
            let mut out = Vec::new();
            for (kind, src) in [
                (ScenarioKind::ReproduceInterior, vec2(0.0, 0.0)),
                (ScenarioKind::ReproduceExterior, vec2(0.5, 0.55)),
            ] {
                for &(n, m, noise) in &variants {
                    let mut c = reproduction_preset(kind, src, 0.2, n, m, 1.0);
                    let dt = 1.0 / m as f64;
                    let stride = m / 50;
                    c.metric_times = times(m / 10, m, stride, dt);
                    c.snapshots = vec![1.0];
                    c.noise = noise;
                    c.chosen = vec![
                        "final time 1.0".into(),
                        "metric times every 0.02 from 0.1".into(),
                    ];
                    if fig == 7 {
                        c.chosen.push("segment counts 25, 50, 100".into());
                    }
                    if fig == 8 {
                        c.chosen.push("step counts 250, 500, 1000".into());
                    }
                    if fig == 9 {
                        c.chosen.push("noise seed 7".into());
                    }
                    out.push(c);
                }
            }
            Ok(out)
        }
        10 => {
            let mut c = ScenarioConfig::new(
                ScenarioKind::CloakObject,
                Shape::Circle { center: vec2(0.5, 0.5), radius: 1.0 / 3.0 },
            );
            c.diffusivity = 0.2;
            c.final_time = 0.5;
            c.steps = 600;
            c.cloak_segments = 128;
            c.sources = vec![PointSource::new(vec2(0.9, 0.3))];
            c.inclusion = Some(Shape::Kite { center: vec2(0.525, 0.5), scale: 0.1 });
            c.inclusion_segments = 96;
            c.grid = GridSpec::unit_square(200);
            c.snapshots = vec![0.05, 0.25, 0.5];
            c.metric_times = c.snapshots.clone();
            c.chosen = vec!["kite center (0.525, 0.5), scale 0.1".into(), "96 kite segments".into()];
            Ok(vec![c])
        }
        11 => {
            let mut c = ScenarioConfig::new(ScenarioKind::MimicSource, unit_disk_quarter());
            c.sources = vec![PointSource::new(vec2(0.6, 0.4))];
            c.mimic_sources = vec![PointSource::new(vec2(0.39, 0.6))];
            c.grid = GridSpec::unit_square(200);
            c.chosen = vec![
                "k = 0.2".into(),
                "cloak circle center (0.5, 0.5), radius 0.25".into(),
                "128 segments, 200 steps on [0, 0.2]".into(),
            ];
            Ok(vec![c])
        }
        12 => {
            let mut c = ScenarioConfig::new(
                ScenarioKind::MimicObject,
                Shape::Circle { center: vec2(0.5, 0.5), radius: 0.2 },
            );
            c.final_time = 0.05;
            c.steps = 180;
            c.sources = vec![PointSource::new(vec2(0.25, 0.5))];
            c.inclusion = Some(Shape::Kite { center: vec2(0.515, 0.5), scale: 0.06 });
            c.stand_in = Some(Shape::Flower { center: vec2(0.5, 0.5), mean_radius: 0.08, amplitude: 0.02, petals: 5 });
            c.inclusion_segments = 64;
            c.grid = GridSpec::unit_square(200);
            c.snapshots = vec![0.05];
            c.metric_times = vec![0.05];
            c.chosen = vec![
                "cloak radius 0.2 so the source at (0.25, 0.5) lies outside the cloak".into(),
                "kite center (0.515, 0.5), scale 0.06".into(),
                "flower center (0.5, 0.5), radius 0.08 + 0.02 cos 5θ".into(),
                "64 object segments".into(),
            ];
            Ok(vec![c])
        }
        _ => Err(Error::InvalidArgument(format!(
            "no preset for figure {fig}; available: 3, 4, 7, 8, 9, 10, 11, 12"
        ))),
    }
}
