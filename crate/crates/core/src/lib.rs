//! Differentiable physics-based skinning for articulated objects.
//!
//! The crate deforms volumetric particle clouds with an MLS-MPM soft-body
//! simulator driven by embedded driving points, and solves the inverse
//! problem of recovering material parameters and per-frame driving-point
//! velocities from an observed motion sequence through a hand-written
//! simulation adjoint.
//!
//! Module map:
//! - [`geometry`]: OBJ loading, point-in-mesh tests, voxel-based volumetric sampling
//! - [`material`]: Gaussian-ellipsoid material prototypes and the Fixed Corotated model
//! - [`mpm`]: forward MLS-MPM simulation (P2G, grid update, G2P, rollout)
//! - [`adjoint`]: checkpointed reverse-mode gradients through the rollout
//! - [`rigging`]: spectral clustering, joint localization, driving-point initialization
//! - [`inverse`]: alternating material/velocity optimization and evaluation metrics
//! - [`io`]: trajectory, skinning-weight, checkpoint, and report file formats
//! - [`config`]: scene configuration
//! - [`pipeline`]: end-to-end drivers behind the CLI subcommands

pub mod adjoint;
pub mod config;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod material;
pub mod math;
pub mod mpm;
pub mod pipeline;
pub mod rigging;

pub use error::{Error, Result};
pub use math::{Mat3, Vec3};
