//! Sub-Riemannian geodesic tracking on the projective line bundle PT(R²).
//!
//! The crate computes distance maps for a data-driven sub-Riemannian metric
//! on the space of planar positions and orientations, either on the full
//! roto-translation group SE(2) (orientations in [0, 2π)) or on its quotient
//! PT(R²) (line orientations in [0, π)), and extracts minimizing geodesics by
//! intrinsic gradient descent on the distance map.
//!
//! Main pieces:
//!
//! - [`geometry`]: SE(2) group operations, the projective quotient, the
//!   left-invariant frame and the (ε-relaxed) sub-Riemannian metric tensor.
//! - [`fields`]: sampled scalar fields on (x, y, θ) grids with periodic θ,
//!   interpolation, frame derivatives, and the `SRF1` binary file format.
//! - [`eikonal`]: an upwind Gauss–Seidel sweeping solver for the eikonal
//!   boundary-value problem that produces the distance map.
//! - [`tracker`]: geodesic backtracking on a distance map and cusp detection
//!   on the spatial control of the extracted curves.
//! - [`cost`]: cost synthesis from grayscale images via an oriented filter
//!   bank, crosswise vesselness, and `C = 1/(1 + λVᵖ)`.
//! - [`elliptic`]: elliptic integrals, Jacobi elliptic functions, and the
//!   two-equation system for the critical sphere radius.
//! - [`maxwell`]: numerical probing of spheres, Maxwell strata, multiplicity,
//!   and the cuspless reachable-set symmetry union.
//! - [`phantom`]: deterministic synthetic vessel images for tests and demos.
//! - [`cli`]: the `srtrack` command-line front end.
//!
//! Every runnable capability has a corresponding example under `examples/`;
//! start with `cargo run --example critical_radius`.

pub mod cli;
pub mod cost;
pub mod eikonal;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod maxwell;
pub mod phantom;
pub mod tracker;

pub use error::{Error, Result};
pub use fields::{FieldKind, GridSpec, ScalarField3};
pub use geometry::{GroupElement, MetricParams, ProjectivePoint, Tangent};
