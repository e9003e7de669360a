//! Boundary-integral potentials for the two-dimensional transient heat equation.
//!
//! The crate reproduces temperature fields inside or outside a closed curve from
//! monopole (single layer) and dipole (double layer) densities placed on the curve,
//! and composes those reproductions into active cloaking and mimicking experiments
//! for point sources and homogeneous Dirichlet inclusions.
//!
//! Time convolutions use the midpoint rule: density rows live at `(m + 1/2)·dt`,
//! fields are evaluated at `j·dt`, so every kernel lag is at least `dt/2`.
//! Boundary integrals use the trapezoidal rule on chord midpoints of a uniformly
//! parametrized curve.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature evaluates field grids with rayon.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod field;
pub mod geometry;
pub mod initial;
pub mod kernel;
pub mod potentials;
pub mod reproduction;
pub mod scattering;
pub mod scenarios;
pub mod special;

mod math;

pub use error::{Error, Result};
pub use field::{FieldModel, FieldTerm};
pub use geometry::{
    discretize, make_curve, region_mask, uniform_grid, BoundaryMesh, ClosedCurve, FieldGrid,
    Rect, RegionMask, Shape,
};
pub use kernel::Diffusivity;
pub use potentials::{
    apply_operator, assemble_operator, eval_double_layer, eval_single_layer, forward_block_solve,
    BlockConvOperator, OperatorKind, SpaceTimeDensity, TimeGrid,
};
pub use reproduction::{PointSource, TracePair};
pub use scattering::DirichletInclusion;
pub use scenarios::{ScenarioConfig, ScenarioKind, ScenarioResult};

/// Points and vectors in the plane.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Shorthand constructor for [`Vec2`].
#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}
