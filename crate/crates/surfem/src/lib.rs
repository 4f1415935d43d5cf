//! Finite elements on triangulated surfaces: level-set geometries,
//! mesh generation and refinement, P1 assembly and solvers, gradient
//! recovery with a posteriori error estimation, and experiment drivers.

pub mod geometry;
pub mod mesh;
pub mod fem;
pub mod recovery;
pub mod estimator;
pub mod harness;
