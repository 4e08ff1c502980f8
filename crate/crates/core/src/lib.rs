//! Mixed finite elements for nearly incompressible elasticity and Stokes flow
//! on quadrilateral and hexahedral meshes.
//!
//! The displacement (or velocity) lives in the bilinear/trilinear space enriched
//! with one gradient-weighted bubble field per element and component; the pressure
//! is piecewise constant on the vertex-centred dual mesh. Because the dual-cell mass
//! matrix is diagonal, the pressure condenses out exactly and leaves a symmetric
//! positive definite displacement system.
//!
//! Module map:
//! - [`mesh`]: structured primal meshes, dual control volumes, patches, VTK export
//! - [`fespace`]: reference basis, bubbles, enrichment fields, quadrature, dof map
//! - [`assembly`]: the `A`, `B`, `C` blocks, loads, Dirichlet elimination
//! - [`solve`]: sparse kernels, condensed SPD solve, saddle-point solve
//! - [`analysis`]: exact beam solution, error norms, patch rank and inf-sup tests, benchmarks
//! - [`cli`]: the `dualpress` command line front end

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod fespace;
pub mod mesh;
pub mod solve;

pub use error::{FemError, Result};

/// Physical point; unused trailing coordinates are zero in 2D.
pub type Point = [f64; 3];
