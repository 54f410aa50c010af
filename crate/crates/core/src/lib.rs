//! Curvilinear photomask optimization. Mask regions are closed periodic
//! B-spline curves; the coherent aerial image is computed by Gaussian
//! quadrature over a refined triangulation of each region, convolved with
//! the Airy kernel; control points descend an analytic shape gradient of a
//! sigmoid-thresholded image-fidelity objective.
//!
//! All lengths inside the library are normalized by `λ0 / NA`; see
//! [`optics::OpticalConfig`] for the conversion from nanometres.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod gradient;
pub mod mesh;
pub mod objective;
pub mod optics;
pub mod optimizer;
pub mod problem;
pub mod spline;

pub use error::{Error, Result};
pub use geometry::Point;
pub use mesh::{ProvenancedMesh, TriangleQuadrature};
pub use objective::{ResistModel, TargetRaster};
pub use optics::{ImageGrid, OpticalConfig};
pub use optimizer::{optimize, OptimizerConfig, StopReason};
pub use problem::{Evaluation, MaskProblem};
pub use spline::PeriodicSplineRegion;
