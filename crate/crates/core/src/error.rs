use alloc::string::String;

/// Errors raised by the boundary-integral machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time must be strictly positive, got {0}")]
    NonPositiveTime(f64),

    #[error("normal vector is not unit length (|n| = {0})")]
    NonUnitNormal(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("target {index} lies on the boundary; use the boundary operators instead")]
    TargetOnBoundary { index: usize },

    #[error("target {index} lies inside the inclusion where the scattered-field representation is not valid")]
    TargetInsideInclusion { index: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error(
        "first time block is ill-conditioned (condition estimate {condition:.3e} > {limit:.0e}); \
         refine the time step relative to the boundary spacing"
    )]
    IllConditioned { condition: f64, limit: f64 },

    #[error("reference norm is zero on the {0} region; relative error undefined")]
    ZeroReference(&'static str),

    #[error("containment violated: {0}")]
    Containment(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
