//! Scattering by a homogeneous Dirichlet inclusion.
//!
//! The scattered field is sought as `u_s = DL[−u_i] − SL[ψ]` outside the
//! inclusion `R`. Its exterior boundary limit is `−u_i/2 + 𝒦(−u_i) − 𝒱ψ`, and
//! requiring `u_i + u_s = 0` on `∂R` gives the first-kind equation
//! `𝒱ψ = u_i/2 − 𝒦 u_i`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::geometry::{discretize, BoundaryMesh, ClosedCurve};
use crate::kernel::Diffusivity;
use crate::potentials::{
    apply_operator, assemble_operator, eval_layers, forward_block_solve_report, LayerSource,
    OperatorKind, SpaceTimeDensity, TimeGrid,
};
use crate::Vec2;

/// An inclusion `R` held at temperature zero.
#[derive(Debug, Clone)]
pub struct DirichletInclusion {
    pub mesh: Arc<BoundaryMesh>,
}

impl DirichletInclusion {
    pub fn new(curve: &ClosedCurve, segments: usize) -> Result<Self> {
        Ok(Self { mesh: Arc::new(discretize(curve, segments)?) })
    }

    pub fn from_mesh(mesh: Arc<BoundaryMesh>) -> Self {
        Self { mesh }
    }

    pub fn curve(&self) -> &ClosedCurve {
        &self.mesh.curve
    }
}

/// Incident data driving a Dirichlet inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentData {
    /// `u_i` on `∂R` at the density sample times `(m + 1/2)·dt`; the double
    /// layer density of the scattered field.
    pub dirichlet: SpaceTimeDensity,
    /// `u_i` on `∂R` at the times `(m + 1)·dt` where row `m` of the discrete
    /// boundary operators lives; enters the jump term `u_i/2`.
    pub at_operator_times: SpaceTimeDensity,
}

impl IncidentData {
    /// Both rows sampled at midpoint times.
    pub fn midpoint_only(dirichlet: SpaceTimeDensity) -> Self {
        Self { at_operator_times: dirichlet.clone(), dirichlet }
    }

    /// Samples a field model on the inclusion nodes.
    ///
    /// Point-source terms are sampled exactly at both time sets; layer terms are
    /// averaged over neighbouring steps for the midpoint samples.
    pub fn from_model(model: &FieldModel, mesh: &BoundaryMesh) -> Result<Self> {
        let tg = *model.time_grid();
        let dirichlet = FieldModel::midpoint_traces(&[model], mesh)?.remove(0).dirichlet;
        let steps: Vec<usize> = (1..=tg.steps()).collect();
        let vals = FieldModel::evaluate(&[model], &mesh.centers, &steps)?.remove(0);
        let at_operator_times = SpaceTimeDensity::from_fn(tg.steps(), mesh.len(), |m, s| vals[m][s]);
        Ok(Self { dirichlet, at_operator_times })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            dirichlet: self.dirichlet.scaled(alpha),
            at_operator_times: self.at_operator_times.scaled(alpha),
        }
    }

    /// Data relative to an inclusion held at the constant temperature `c`:
    /// the scattered field then has boundary values `c − u_i`.
    pub fn relative_to(&self, c: f64) -> Self {
        if c == 0.0 {
            return self.clone();
        }
        let shift = |d: &SpaceTimeDensity| SpaceTimeDensity::from_fn(d.rows(), d.cols(), |m, s| d.get(m, s) - c);
        Self { dirichlet: shift(&self.dirichlet), at_operator_times: shift(&self.at_operator_times) }
    }
}

/// Solution of the boundary integral equation.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub psi: SpaceTimeDensity,
    /// `‖𝒱ψ − rhs‖∞ / ‖rhs‖∞`.
    pub residual: f64,
    /// 1-norm condition number of the first time block.
    pub condition: f64,
}

/// Solves `𝒱ψ = u_i/2 − 𝒦 u_i` on the inclusion mesh by block forward substitution.
pub fn solve_dirichlet_density(
    inclusion: &DirichletInclusion,
    incident: &IncidentData,
    tg: &TimeGrid,
    k: Diffusivity,
) -> Result<DirichletSolution> {
    let mesh = &inclusion.mesh;
    let v = assemble_operator(OperatorKind::Single, mesh, tg, k)?;
    let kop = assemble_operator(OperatorKind::Double, mesh, tg, k)?;
    let k_ui = apply_operator(&kop, &incident.dirichlet)?;
    let rhs = k_ui.scaled(-1.0).axpy(0.5, &incident.at_operator_times)?;
    let report = forward_block_solve_report(&v, &rhs)?;
    Ok(DirichletSolution { psi: report.solution, residual: report.residual, condition: report.condition })
}

/// Layer combination of the scattered field `DL[−u_i] − SL[ψ]`.
pub fn scattered_source<'a>(incident_dirichlet: &'a SpaceTimeDensity, psi: &'a SpaceTimeDensity) -> LayerSource<'a> {
    LayerSource { single: Some((-1.0, psi)), double: Some((-1.0, incident_dirichlet)) }
}

/// The scattered field as a [`FieldModel`].
pub fn scattered_model(
    inclusion: &DirichletInclusion,
    incident_dirichlet: &SpaceTimeDensity,
    psi: &SpaceTimeDensity,
    tg: TimeGrid,
    k: Diffusivity,
) -> Result<FieldModel> {
    FieldModel::new(tg, k).with_layers(
        &inclusion.mesh,
        Some((-1.0, Arc::new(psi.clone()))),
        Some((-1.0, Arc::new(incident_dirichlet.clone()))),
    )
}

/// Scattered field `DL[−u_i] − SL[ψ]` at step `j`; targets inside `R` are rejected.
pub fn scattered_field(
    inclusion: &DirichletInclusion,
    incident_dirichlet: &SpaceTimeDensity,
    psi: &SpaceTimeDensity,
    targets: &[Vec2],
    tg: &TimeGrid,
    j: usize,
    k: Diffusivity,
) -> Result<Vec<f64>> {
    if let Some(index) = targets.iter().position(|&x| inclusion.curve().contains(x)) {
        return Err(Error::TargetInsideInclusion { index });
    }
    let mut out = eval_layers(
        &inclusion.mesh,
        &[scattered_source(incident_dirichlet, psi)],
        targets,
        tg,
        &[j],
        k,
    )?;
    Ok(out.swap_remove(0).swap_remove(0))
}

/// Exterior boundary limit of the scattered field at the collocation nodes,
/// `−u_i/2 + 𝒦(−u_i) − 𝒱ψ`, at the operator times `(m + 1)·dt`.
pub fn exterior_boundary_trace(
    inclusion: &DirichletInclusion,
    incident: &IncidentData,
    psi: &SpaceTimeDensity,
    tg: &TimeGrid,
    k: Diffusivity,
) -> Result<SpaceTimeDensity> {
    let v = assemble_operator(OperatorKind::Single, &inclusion.mesh, tg, k)?;
    let kop = assemble_operator(OperatorKind::Double, &inclusion.mesh, tg, k)?;
    let k_ui = apply_operator(&kop, &incident.dirichlet)?;
    let v_psi = apply_operator(&v, psi)?;
    k_ui.scaled(-1.0).axpy(-1.0, &v_psi)?.axpy(-0.5, &incident.at_operator_times)
}
