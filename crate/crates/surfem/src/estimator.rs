//! Recovery-based a posteriori error estimation, bulk marking, and the
//! adaptive solve loop.

use std::time::Instant;

use crate::fem::{
    assemble_load, assemble_mass, assemble_stiffness, check_scalar, check_vector, error_norms,
    fe_gradient, solve_mean_zero, solve_spd, FemError, ScalarField, VectorField,
};
use crate::geometry::{GeometryError, ManufacturedProblem, Vec3};
use crate::mesh::{bisect_marked, MeshError, SurfaceMesh};
use crate::recovery::{RecoveryError, RecoveryMethod};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("marking fraction theta must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-triangle error indicators together with their l2 aggregate.
#[derive(Clone, Debug)]
pub struct ErrorIndicator {
    pub per_triangle: Vec<f64>,
    pub global: f64,
    pub generation: u32,
}

/// L2 distance per triangle between the recovered gradient (interpolated
/// linearly) and the constant face gradient, integrated by the
/// edge-midpoint rule, which is exact here.
pub fn estimate(
    mesh: &SurfaceMesh,
    u_h: &ScalarField,
    recovered: &VectorField,
) -> Result<ErrorIndicator, EstimatorError> {
    check_scalar(mesh, u_h)?;
    check_vector(mesh, recovered)?;
    let grad = fe_gradient(mesh, u_h)?;
    let mut per_triangle = Vec::with_capacity(mesh.num_triangles());
    let mut total = 0.0;
    for j in 0..mesh.num_triangles() {
        let t = mesh.triangle(j);
        let r = [recovered.values[t[0]], recovered.values[t[1]], recovered.values[t[2]]];
        let area = mesh.triangle_area(j);
        // midpoint of edge (a, b) carries (r_a + r_b) / 2
        let mut sq = 0.0;
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let diff = (r[a] + r[b]) * 0.5 - grad.values[j];
            sq += diff.norm_squared() / 3.0;
        }
        let eta2 = area * sq;
        per_triangle.push(eta2.sqrt());
        total += eta2;
    }
    Ok(ErrorIndicator { per_triangle, global: total.sqrt(), generation: mesh.generation() })
}

/// Smallest set of triangles (greedy by indicator, ties broken by index)
/// whose squared indicators hold at least `theta` of the total.
pub fn dorfler_mark(indicator: &ErrorIndicator, theta: f64) -> Result<Vec<usize>, EstimatorError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(EstimatorError::InvalidTheta(theta));
    }
    let total: f64 = indicator.per_triangle.iter().map(|e| e * e).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..indicator.per_triangle.len()).collect();
    order.sort_by(|&a, &b| {
        indicator.per_triangle[b]
            .total_cmp(&indicator.per_triangle[a])
            .then(a.cmp(&b))
    });
    let mut marked = Vec::new();
    let mut mass = 0.0;
    for j in order {
        marked.push(j);
        mass += indicator.per_triangle[j] * indicator.per_triangle[j];
        if mass >= theta * total {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Ratio of estimated to true gradient error.
pub fn effectivity_index(indicator: &ErrorIndicator, de: f64) -> f64 {
    indicator.global / de
}

/// One record per adaptive iteration.
#[derive(Clone, Debug)]
pub struct AdaptiveStep {
    pub iteration: usize,
    pub dof: usize,
    pub eta: f64,
    pub de: f64,
    pub effectivity: f64,
    pub marked: usize,
    pub wall_ms: f64,
    /// Barycenters of the marked triangles, for concentration diagnostics.
    pub marked_barycenters: Vec<Vec3>,
}

pub struct AdaptiveRun {
    pub steps: Vec<AdaptiveStep>,
    pub mesh: SurfaceMesh,
    pub solution: ScalarField,
    pub recovered: VectorField,
    pub indicator: ErrorIndicator,
}

/// Assemble and solve the discrete problem on the given mesh, picking the
/// singular (mean-zero) or definite formulation as the problem requires.
pub fn solve_problem(
    mesh: &SurfaceMesh,
    problem: &ManufacturedProblem,
) -> Result<ScalarField, EstimatorError> {
    let k = assemble_stiffness(mesh);
    let b = assemble_load(mesh, problem)?;
    let m = assemble_mass(mesh);
    if problem.zeroth_order_coefficient() > 0.0 {
        // K + c M is definite; c is 1 for every problem that uses it
        debug_assert_eq!(problem.zeroth_order_coefficient(), 1.0);
        let a = k.add(&m);
        Ok(solve_spd(&a, &b, mesh.generation())?)
    } else {
        Ok(solve_mean_zero(&k, &m, &b, mesh.generation())?)
    }
}

/// Solve, estimate, mark, and bisect until the Dof budget is exceeded.
/// The mesh that first exceeds `max_dof` is solved and recorded, then the
/// loop stops.
pub fn adaptive_solve(
    initial: &SurfaceMesh,
    problem: &ManufacturedProblem,
    method: RecoveryMethod,
    theta: f64,
    max_dof: usize,
) -> Result<AdaptiveRun, EstimatorError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(EstimatorError::InvalidTheta(theta));
    }
    let surface = problem.surface();
    let mut mesh = initial.clone();
    let mut steps = Vec::new();
    let mut iteration = 0;
    loop {
        let start = Instant::now();
        let u = solve_problem(&mesh, problem)?;
        let recovered = method.apply(&mesh, &u, Some(surface))?;
        let indicator = estimate(&mesh, &u, &recovered)?;
        let norms = error_norms(&mesh, problem, &u, Some(&recovered))?;
        let stop = mesh.num_vertices() > max_dof;
        let marked = if stop { Vec::new() } else { dorfler_mark(&indicator, theta)? };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        steps.push(AdaptiveStep {
            iteration,
            dof: mesh.num_vertices(),
            eta: indicator.global,
            de: norms.de,
            effectivity: effectivity_index(&indicator, norms.de),
            marked: marked.len(),
            wall_ms,
            marked_barycenters: marked.iter().map(|&j| mesh.triangle_barycenter(j)).collect(),
        });
        if stop || marked.is_empty() {
            return Ok(AdaptiveRun { steps, mesh, solution: u, recovered, indicator });
        }
        mesh = bisect_marked(&mesh, &marked, Some(surface))?;
        iteration += 1;
    }
}
