//! Linear finite elements on triangulated surfaces: sparse assembly of the
//! Laplace-Beltrami stiffness and mass, conjugate-gradient solvers, nodal
//! interpolation, piecewise-constant surface gradients and error norms.

use nalgebra::Matrix3;

use crate::geometry::{GeometryError, ManufacturedProblem, Vec3, PROJECTION_TOL};
use crate::mesh::SurfaceMesh;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("field generation {field} does not match mesh generation {mesh}")]
    GenerationMismatch { field: u32, mesh: u32 },
    #[error("field length {field} does not match mesh ({expected})")]
    LengthMismatch { field: usize, expected: usize },
    #[error("solver did not converge: relative residual {residual:.3e} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Symmetric 6-point degree-4 triangle quadrature (barycentric, weight),
/// weights normalized to sum to 1.
pub const QUAD_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const W2: f64 = 0.109951743655322;
    const B1: f64 = 1.0 - 2.0 * A1;
    const B2: f64 = 1.0 - 2.0 * A2;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Edge-midpoint rule, exact for quadratics.
pub const QUAD_EDGE_MIDPOINT: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Row-compressed sparse matrix (full symmetric storage).
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n];
        for &(r, _, _) in triplets {
            counts[r] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let mut col_idx = vec![0usize; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        let mut cursor = row_ptr.clone();
        for &(r, c, v) in triplets {
            col_idx[cursor[r]] = c;
            values[cursor[r]] = v;
            cursor[r] += 1;
        }
        // sort each row and merge duplicates
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut out_ptr = vec![0usize; n + 1];
        for i in 0..n {
            let lo = row_ptr[i];
            let hi = row_ptr[i + 1];
            let mut row: Vec<(usize, f64)> =
                col_idx[lo..hi].iter().copied().zip(values[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if out_cols.len() > out_ptr[i] && *out_cols.last().unwrap() == c {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            out_ptr[i + 1] = out_cols.len();
        }
        CsrMatrix { n, row_ptr: out_ptr, col_idx: out_cols, values: out_vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }

    /// Sum of two matrices on the same dimension.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.values.len() + other.values.len());
        for m in [self, other] {
            for i in 0..m.n {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    triplets.push((i, m.col_idx[k], m.values[k]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    pub fn sum_of_entries(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest relative symmetry defect, for diagnostics.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.entry(j, i)).abs() / scale);
            }
        }
        worst
    }
}

/// Per-vertex scalar values tagged with the mesh generation.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub generation: u32,
}

/// Per-vertex 3-vector values tagged with the mesh generation.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub values: Vec<Vec3>,
    pub generation: u32,
}

/// Per-triangle constant 3-vectors (FE surface gradients).
#[derive(Clone, Debug)]
pub struct FaceField {
    pub values: Vec<Vec3>,
    pub generation: u32,
}

pub(crate) fn check_scalar(mesh: &SurfaceMesh, f: &ScalarField) -> Result<(), FemError> {
    if f.generation != mesh.generation() {
        return Err(FemError::GenerationMismatch { field: f.generation, mesh: mesh.generation() });
    }
    if f.values.len() != mesh.num_vertices() {
        return Err(FemError::LengthMismatch { field: f.values.len(), expected: mesh.num_vertices() });
    }
    Ok(())
}

pub(crate) fn check_vector(mesh: &SurfaceMesh, f: &VectorField) -> Result<(), FemError> {
    if f.generation != mesh.generation() {
        return Err(FemError::GenerationMismatch { field: f.generation, mesh: mesh.generation() });
    }
    if f.values.len() != mesh.num_vertices() {
        return Err(FemError::LengthMismatch { field: f.values.len(), expected: mesh.num_vertices() });
    }
    Ok(())
}

/// In-plane gradients of the three hat functions on triangle `j`.
pub fn hat_gradients(mesh: &SurfaceMesh, j: usize) -> [Vec3; 3] {
    let t = mesh.triangle(j);
    let p = [mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])];
    let n = mesh.triangle_normal(j);
    let a2 = 2.0 * mesh.triangle_area(j);
    [
        n.cross(&(p[2] - p[1])) / a2,
        n.cross(&(p[0] - p[2])) / a2,
        n.cross(&(p[1] - p[0])) / a2,
    ]
}

/// Stiffness matrix of the surface Laplacian: symmetric positive
/// semidefinite with the constants in its kernel.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for j in 0..mesh.num_triangles() {
        let t = mesh.triangle(j);
        let g = hat_gradients(mesh, j);
        let area = mesh.triangle_area(j);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((t[a], t[b], area * g[a].dot(&g[b])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), &triplets)
}

/// Consistent P1 mass matrix; entries sum to the mesh area.
pub fn assemble_mass(mesh: &SurfaceMesh) -> CsrMatrix {
    let local = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0);
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for j in 0..mesh.num_triangles() {
        let t = mesh.triangle(j);
        let area = mesh.triangle_area(j);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((t[a], t[b], area / 12.0 * local[(a, b)]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), &triplets)
}

/// Load vector with the exact data composed with the closest-point
/// projection, integrated by the degree-4 rule.
pub fn assemble_load(mesh: &SurfaceMesh, problem: &ManufacturedProblem) -> Result<Vec<f64>, FemError> {
    let surface = problem.surface();
    let mut b = vec![0.0; mesh.num_vertices()];
    for j in 0..mesh.num_triangles() {
        let t = mesh.triangle(j);
        let p = [mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])];
        let area = mesh.triangle_area(j);
        for (bary, w) in QUAD_DEG4 {
            let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
            let on_surface = surface.project_closest_point(x, PROJECTION_TOL)?;
            let f = problem.source_term(on_surface)?;
            for a in 0..3 {
                b[t[a]] += w * area * f * bary[a];
            }
        }
    }
    Ok(b)
}

struct PcgOutcome {
    x: Vec<f64>,
    iters: usize,
    relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients, optionally deflating the
/// all-ones nullspace.
fn jacobi_pcg(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    deflate_ones: bool,
) -> PcgOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let remove_mean = |v: &mut [f64]| {
        let mean: f64 = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };

    let mut b = b.to_vec();
    if deflate_ones {
        remove_mean(&mut b);
    }
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return PcgOutcome { x: vec![0.0; n], iters: 0, relative_residual: 0.0 };
    }

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    if deflate_ones {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for iter in 1..=max_iters {
        a.matvec(&p, &mut ap);
        if deflate_ones {
            remove_mean(&mut ap);
        }
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            return PcgOutcome { x, iters: iter, relative_residual: rn / b_norm };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if deflate_ones {
            remove_mean(&mut x);
            remove_mean(&mut r);
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= tol * b_norm {
            return PcgOutcome { x, iters: iter, relative_residual: rn / b_norm };
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if deflate_ones {
            remove_mean(&mut z);
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    PcgOutcome { x, iters: max_iters, relative_residual: rn / b_norm }
}

pub const SOLVER_TOL: f64 = 1e-10;

/// Solve the singular Neumann system `K u = b` on the complement of the
/// constants; the result has mass-weighted mean zero.
pub fn solve_mean_zero(
    k: &CsrMatrix,
    mass: &CsrMatrix,
    b: &[f64],
    mesh_generation: u32,
) -> Result<ScalarField, FemError> {
    let n = k.dim();
    let out = jacobi_pcg(k, b, SOLVER_TOL, 10 * n.max(100), true);
    if out.relative_residual > SOLVER_TOL {
        return Err(FemError::NonConvergence { residual: out.relative_residual, iters: out.iters });
    }
    let mut u = out.x;
    // mass-weighted mean shift
    let ones = vec![1.0; n];
    let mut mu = vec![0.0; n];
    mass.matvec(&u, &mut mu);
    let mut m1 = vec![0.0; n];
    mass.matvec(&ones, &mut m1);
    let total: f64 = m1.iter().sum();
    let mean: f64 = mu.iter().sum::<f64>() / total;
    u.iter_mut().for_each(|x| *x -= mean);
    Ok(ScalarField { values: u, generation: mesh_generation })
}

/// Solve a symmetric positive definite system by preconditioned CG.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], mesh_generation: u32) -> Result<ScalarField, FemError> {
    let n = a.dim();
    let out = jacobi_pcg(a, b, SOLVER_TOL, 10 * n.max(100), false);
    if out.relative_residual > SOLVER_TOL {
        return Err(FemError::NonConvergence { residual: out.relative_residual, iters: out.iters });
    }
    Ok(ScalarField { values: out.x, generation: mesh_generation })
}

/// Nodal interpolation of the exact solution through the closest-point map.
pub fn interpolate(mesh: &SurfaceMesh, problem: &ManufacturedProblem) -> Result<ScalarField, FemError> {
    let surface = problem.surface();
    let values = mesh
        .vertices()
        .iter()
        .map(|&v| {
            let p = surface.project_closest_point(v, PROJECTION_TOL)?;
            Ok(problem.u_exact(p))
        })
        .collect::<Result<Vec<f64>, GeometryError>>()?;
    Ok(ScalarField { values, generation: mesh.generation() })
}

/// Piecewise-constant surface gradient of a nodal field.
pub fn fe_gradient(mesh: &SurfaceMesh, u: &ScalarField) -> Result<FaceField, FemError> {
    check_scalar(mesh, u)?;
    let values = (0..mesh.num_triangles())
        .map(|j| {
            let t = mesh.triangle(j);
            let g = hat_gradients(mesh, j);
            g[0] * u.values[t[0]] + g[1] * u.values[t[1]] + g[2] * u.values[t[2]]
        })
        .collect();
    Ok(FaceField { values, generation: u.generation })
}

/// Error norms of the FE solution and optionally a recovered gradient field.
#[derive(Clone, Debug)]
pub struct ErrorNorms {
    /// `|T_h grad u - grad u_h|` in L2 over the mesh.
    pub de: f64,
    /// `|grad u_I - grad u_h|` in L2.
    pub de_interp: f64,
    /// `|T_h grad u - G u_h|` in L2 (recovered field interpolated linearly).
    pub de_recovered: Option<f64>,
    /// Max over vertices of `|G u_h - T_h grad u|`.
    pub de_max_recovered: Option<f64>,
    /// L2 norm of the exact surface gradient, for relative reporting.
    pub exact_gradient_l2: f64,
}

pub fn error_norms(
    mesh: &SurfaceMesh,
    problem: &ManufacturedProblem,
    u_h: &ScalarField,
    recovered: Option<&VectorField>,
) -> Result<ErrorNorms, FemError> {
    check_scalar(mesh, u_h)?;
    if let Some(r) = recovered {
        check_vector(mesh, r)?;
    }
    let surface = problem.surface();
    let grad_h = fe_gradient(mesh, u_h)?;
    let u_i = interpolate(mesh, problem)?;
    let grad_i = fe_gradient(mesh, &u_i)?;

    use rayon::prelude::*;
    let sums: Result<[f64; 4], FemError> = (0..mesh.num_triangles())
        .into_par_iter()
        .try_fold(
            || [0.0f64; 4],
            |mut acc, j| {
                let t = mesh.triangle(j);
                let p = [mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])];
                let area = mesh.triangle_area(j);
                acc[1] += area * (grad_i.values[j] - grad_h.values[j]).norm_squared();
                for (bary, w) in QUAD_DEG4 {
                    let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
                    let on_surface = surface.project_closest_point(x, PROJECTION_TOL)?;
                    let tg = problem.tangential_gradient(on_surface)?;
                    acc[0] += w * area * (tg - grad_h.values[j]).norm_squared();
                    acc[3] += w * area * tg.norm_squared();
                    if let Some(rec) = recovered {
                        let lin = rec.values[t[0]] * bary[0]
                            + rec.values[t[1]] * bary[1]
                            + rec.values[t[2]] * bary[2];
                        acc[2] += w * area * (tg - lin).norm_squared();
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || [0.0f64; 4],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]),
        );
    let [de2, de_i2, de_rec2, exact2] = sums?;

    let de_max_recovered = match recovered {
        None => None,
        Some(rec) => {
            let worst: Result<f64, FemError> = mesh
                .vertices()
                .par_iter()
                .enumerate()
                .try_fold(
                    || 0.0f64,
                    |acc, (i, v)| {
                        let on_surface = surface.project_closest_point(*v, PROJECTION_TOL)?;
                        let tg = problem.tangential_gradient(on_surface)?;
                        if !tg.iter().all(|c| c.is_finite()) {
                            return Ok(acc); // singular point of the exact solution
                        }
                        Ok(acc.max((rec.values[i] - tg).norm()))
                    },
                )
                .try_reduce(|| 0.0f64, |a, b| Ok(a.max(b)));
            Some(worst?)
        }
    };

    Ok(ErrorNorms {
        de: de2.sqrt(),
        de_interp: de_i2.sqrt(),
        de_recovered: recovered.map(|_| de_rec2.sqrt()),
        de_max_recovered,
        exact_gradient_l2: exact2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManufacturedProblem;
    use crate::mesh::{build_mesh, chevron_torus_mesh};

    /// Local stiffness of one flat triangle computed directly from the hat
    /// gradients, without needing a closed mesh.
    fn local_stiffness(p: [Vec3; 3]) -> [[f64; 3]; 3] {
        let n_vec = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let area = 0.5 * n_vec.norm();
        let n = n_vec / n_vec.norm();
        let g = [
            n.cross(&(p[2] - p[1])) / (2.0 * area),
            n.cross(&(p[0] - p[2])) / (2.0 * area),
            n.cross(&(p[1] - p[0])) / (2.0 * area),
        ];
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = area * g[a].dot(&g[b]);
            }
        }
        k
    }

    #[test]
    fn local_stiffness_hand_values() {
        let p = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let k = local_stiffness(p);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((k[a][b] - expected[a][b]).abs() < 1e-12, "k[{a}][{b}] = {}", k[a][b]);
            }
        }
    }

    #[test]
    fn local_stiffness_rotation_invariant() {
        let p = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let k0 = local_stiffness(p);
        // rotate by a fixed orthogonal matrix
        let axis = Vec3::new(1.0, 2.0, 3.0).normalize();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), 0.7);
        let pr = [rot * p[0], rot * p[1], rot * p[2]];
        let k1 = local_stiffness(pr);
        for a in 0..3 {
            for b in 0..3 {
                assert!((k0[a][b] - k1[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_kernel_and_symmetry() {
        let mesh = chevron_torus_mesh(12, 8).unwrap();
        let k = assemble_stiffness(&mesh);
        assert!(k.symmetry_defect() < 1e-14);
        let ones = vec![1.0; mesh.num_vertices()];
        let mut y = vec![0.0; mesh.num_vertices()];
        k.matvec(&ones, &mut y);
        let scale = k.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in y {
            assert!(v.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn mass_sums_to_area() {
        let mesh = chevron_torus_mesh(12, 8).unwrap();
        let m = assemble_mass(&mesh);
        assert!((m.sum_of_entries() - mesh.total_area()).abs() < 1e-10);
    }

    #[test]
    fn mass_area_approaches_torus_area() {
        let mesh = chevron_torus_mesh(80, 40).unwrap();
        let m = assemble_mass(&mesh);
        let exact = 16.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((m.sum_of_entries() - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn load_of_zero_source_is_zero() {
        // u = x - y has nonzero f; fabricate the zero case through u constant
        // is not available, so check instead: load entries for f=1 sum areas.
        // Direct check: b_a for f ≡ 1 equals one third of incident area.
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        // integrate f=1 by reusing the quadrature path via a tiny shim
        let mut b = vec![0.0; mesh.num_vertices()];
        for j in 0..mesh.num_triangles() {
            let t = mesh.triangle(j);
            let area = mesh.triangle_area(j);
            for (bary, w) in QUAD_DEG4 {
                for a in 0..3 {
                    b[t[a]] += w * area * bary[a];
                }
            }
        }
        for i in 0..mesh.num_vertices() {
            let incident: f64 = mesh.incident_triangles(i).iter().map(|&j| mesh.triangle_area(j)).sum();
            assert!((b[i] - incident / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn load_is_compatible_with_neumann_problem() {
        // the source integrates to zero over the surface; the discrete load
        // must sum to (nearly) zero so the singular system stays solvable
        let problem = ManufacturedProblem::torus_xy();
        for lvl in 0..2 {
            let mesh = chevron_torus_mesh(16 << lvl, 8 << lvl).unwrap();
            let b = assemble_load(&mesh, &problem).unwrap();
            let defect = b.iter().sum::<f64>().abs();
            let scale: f64 = b.iter().map(|x| x.abs()).sum();
            assert!(defect < 1e-12 * scale.max(1.0), "defect {defect}");
        }
    }

    #[test]
    fn cg_recovers_manufactured_solution() {
        let mesh = chevron_torus_mesh(16, 8).unwrap();
        let k = assemble_stiffness(&mesh);
        let m = assemble_mass(&mesh);
        let n = mesh.num_vertices();
        // deterministic pseudo-random mean-zero field
        let mut w: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        w.iter_mut().for_each(|x| *x -= mean);
        let mut b = vec![0.0; n];
        k.matvec(&w, &mut b);
        let u = solve_mean_zero(&k, &m, &b, mesh.generation()).unwrap();
        // compare after aligning means
        let mu: f64 = u.values.iter().sum::<f64>() / n as f64;
        let mw: f64 = w.iter().sum::<f64>() / n as f64;
        let err: f64 = u
            .values
            .iter()
            .zip(&w)
            .map(|(a, b)| ((a - mu) - (b - mw)).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-8 * scale.max(1.0), "err {err}");
    }

    #[test]
    fn solve_mean_zero_of_zero_rhs_is_zero() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let k = assemble_stiffness(&mesh);
        let m = assemble_mass(&mesh);
        let u = solve_mean_zero(&k, &m, &vec![0.0; mesh.num_vertices()], mesh.generation()).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solution_mean_is_zero() {
        let mesh = chevron_torus_mesh(16, 8).unwrap();
        let problem = ManufacturedProblem::torus_xy();
        let k = assemble_stiffness(&mesh);
        let m = assemble_mass(&mesh);
        let b = assemble_load(&mesh, &problem).unwrap();
        let u = solve_mean_zero(&k, &m, &b, mesh.generation()).unwrap();
        let mut mu = vec![0.0; mesh.num_vertices()];
        m.matvec(&u.values, &mut mu);
        let mean = mu.iter().sum::<f64>().abs();
        assert!(mean <= 1e-10 * mesh.total_area(), "mean {mean}");
    }

    #[test]
    fn spd_solver_identity_and_diagonal() {
        let tri = vec![(0usize, 0usize, 2.0), (1, 1, 4.0), (2, 2, 8.0)];
        let a = CsrMatrix::from_triplets(3, &tri);
        let u = solve_spd(&a, &[2.0, 4.0, 8.0], 0).unwrap();
        for v in &u.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_solver_with_mass_shift() {
        let mesh = chevron_torus_mesh(12, 8).unwrap();
        let k = assemble_stiffness(&mesh);
        let m = assemble_mass(&mesh);
        let a = k.add(&m);
        let n = mesh.num_vertices();
        let w: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&w, &mut b);
        let u = solve_spd(&a, &b, mesh.generation()).unwrap();
        let err: f64 = u.values.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-8 * scale);
    }

    #[test]
    fn interpolation_evaluates_exact_solution() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let problem = ManufacturedProblem::torus_xy();
        let u_i = interpolate(&mesh, &problem).unwrap();
        // chevron vertices are exactly on the torus
        for (i, v) in mesh.vertices().iter().enumerate() {
            assert!((u_i.values[i] - (v.x - v.y)).abs() < 1e-11);
        }
    }

    #[test]
    fn fe_gradient_of_hat_values() {
        // closed octahedron; check the face whose plane we know
        let vertices = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
        ];
        let triangles = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let mesh = build_mesh(vertices, triangles).unwrap();
        // u = x is affine; every face gradient equals in-plane projection of e_x
        let u = ScalarField {
            values: mesh.vertices().iter().map(|v| v.x).collect(),
            generation: 0,
        };
        let g = fe_gradient(&mesh, &u).unwrap();
        for j in 0..mesh.num_triangles() {
            let n = mesh.triangle_normal(j);
            let ex = Vec3::new(1.0, 0.0, 0.0);
            let expected = ex - n * n.dot(&ex);
            assert!((g.values[j] - expected).norm() < 1e-12);
            assert!(g.values[j].dot(&n).abs() < 1e-12);
        }
    }

    #[test]
    fn fe_gradient_constant_field_is_zero() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let u = ScalarField { values: vec![3.5; mesh.num_vertices()], generation: 0 };
        let g = fe_gradient(&mesh, &u).unwrap();
        for v in g.values {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn generation_mismatch_is_detected() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let u = ScalarField { values: vec![0.0; mesh.num_vertices()], generation: 5 };
        assert!(matches!(
            fe_gradient(&mesh, &u),
            Err(FemError::GenerationMismatch { .. })
        ));
    }

    #[test]
    fn constant_mismatch_norm_is_c_sqrt_area() {
        // recovered ≡ exact + c against exact: norm must be |c| sqrt(area)
        let mesh = chevron_torus_mesh(64, 32).unwrap();
        let problem = ManufacturedProblem::torus_xy();
        let surface = problem.surface();
        let c = Vec3::new(0.0, 0.0, 0.25);
        let rec = VectorField {
            values: mesh
                .vertices()
                .iter()
                .map(|&v| {
                    let p = surface.project_closest_point(v, PROJECTION_TOL).unwrap();
                    problem.tangential_gradient(p).unwrap() + c
                })
                .collect(),
            generation: mesh.generation(),
        };
        let u = interpolate(&mesh, &problem).unwrap();
        let norms = error_norms(&mesh, &problem, &u, Some(&rec)).unwrap();
        // the linear interpolation of exact + c differs from exact by c up to
        // the interpolation error of the exact gradient, which is O(h^2)
        let expected = c.norm() * mesh.total_area().sqrt();
        assert!(
            (norms.de_recovered.unwrap() - expected).abs() < 0.05 * expected,
            "{} vs {}",
            norms.de_recovered.unwrap(),
            expected
        );
    }

    #[test]
    fn torus_fe_convergence_first_order() {
        let problem = ManufacturedProblem::torus_xy();
        let mut des = Vec::new();
        for lvl in 0..3 {
            let mesh = chevron_torus_mesh(20 << lvl, 10 << lvl).unwrap();
            let k = assemble_stiffness(&mesh);
            let m = assemble_mass(&mesh);
            let b = assemble_load(&mesh, &problem).unwrap();
            let u = solve_mean_zero(&k, &m, &b, mesh.generation()).unwrap();
            let norms = error_norms(&mesh, &problem, &u, None).unwrap();
            des.push(norms.de);
        }
        let o1 = (des[0] / des[1]).log2();
        let o2 = (des[1] / des[2]).log2();
        assert!((o1 - 1.0).abs() < 0.1, "order {o1}");
        assert!((o2 - 1.0).abs() < 0.1, "order {o2}");
    }
}
