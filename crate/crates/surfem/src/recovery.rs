//! Vertex-based gradient recovery on triangulated surfaces: quadratic
//! least-squares fits in local frames (with or without a fitted height
//! map correcting the metric) and plain averaging of face gradients.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::fem::{check_scalar, fe_gradient, FaceField, FemError, ScalarField, VectorField};
use crate::geometry::{GeometryError, LevelSetSurface, Vec3};
use crate::mesh::{vertex_patch, SurfaceMesh};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("averaged normal at vertex {vertex} is degenerate (|sum| = {norm:.3e})")]
    DegenerateNormal { vertex: usize, norm: f64 },
    #[error("no well-conditioned quadratic fit at vertex {vertex} within ring parameter {max_ring}")]
    PatchRankDeficient { vertex: usize, max_ring: usize },
    #[error("unknown recovery method '{0}'")]
    UnknownMethod(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How the per-vertex normal used for the local frame is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalMode {
    /// Level-set normal evaluated at the vertex.
    Exact,
    /// Arithmetic mean of incident face normals.
    SimpleAverage,
    /// Area-weighted mean of incident face normals.
    AreaWeighted,
}

/// Right-handed orthonormal frame `(t1, t2, normal)` at a vertex.
#[derive(Clone, Copy, Debug)]
pub struct LocalFrame {
    pub t1: Vec3,
    pub t2: Vec3,
    pub normal: Vec3,
}

const MIN_NORMAL_NORM: f64 = 1e-8;
const MAX_RING: usize = 10;
const MIN_PATCH_MEMBERS: usize = 7;
const MAX_CONDITION: f64 = 1e8;

impl LocalFrame {
    /// Complete a unit normal to a frame using the coordinate axis least
    /// aligned with it, so the result is stable under small perturbations.
    pub fn from_normal(normal: Vec3) -> LocalFrame {
        let abs = [normal.x.abs(), normal.y.abs(), normal.z.abs()];
        let k = (0..3).min_by(|&a, &b| abs[a].total_cmp(&abs[b])).unwrap();
        let mut axis = Vec3::zeros();
        axis[k] = 1.0;
        let t1 = (axis - normal * normal.dot(&axis)).normalize();
        let t2 = normal.cross(&t1);
        LocalFrame { t1, t2, normal }
    }
}

/// Per-vertex unit normal from the requested mode.
pub fn vertex_normal(
    mesh: &SurfaceMesh,
    i: usize,
    mode: NormalMode,
    surface: Option<&LevelSetSurface>,
) -> Result<Vec3, RecoveryError> {
    match mode {
        NormalMode::Exact => {
            let s = surface.expect("exact normals require a surface");
            Ok(s.unit_normal(mesh.vertex(i))?)
        }
        NormalMode::SimpleAverage | NormalMode::AreaWeighted => {
            let mut sum = Vec3::zeros();
            for &j in mesh.incident_triangles(i) {
                let w = if mode == NormalMode::AreaWeighted { mesh.triangle_area(j) } else { 1.0 };
                sum += mesh.triangle_normal(j) * w;
            }
            let n = sum.norm();
            if n < MIN_NORMAL_NORM {
                return Err(RecoveryError::DegenerateNormal { vertex: i, norm: n });
            }
            Ok(sum / n)
        }
    }
}

/// A patch expressed in the local frame of its center vertex.
pub struct PatchProjection {
    pub members: Vec<usize>,
    /// In-plane coordinates of each member relative to the center.
    pub coords: Vec<Vector2<f64>>,
    /// Signed height of each member along the center normal.
    pub heights: Vec<f64>,
    /// Length scale used to nondimensionalize the fit.
    pub scale: f64,
}

fn design_rows(zeta: Vector2<f64>) -> [f64; 5] {
    [zeta.x, zeta.y, zeta.x * zeta.x, zeta.x * zeta.y, zeta.y * zeta.y]
}

fn patch_design(coords: &[Vector2<f64>], scale: f64) -> DMatrix<f64> {
    // rows over non-center members (the center row would be identically zero)
    let m = coords.len() - 1;
    DMatrix::from_fn(m, 5, |r, c| design_rows(coords[r + 1] / scale)[c])
}

fn condition_ok(design: &DMatrix<f64>) -> bool {
    if design.nrows() < 5 {
        return false;
    }
    let svd = design.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    min > 0.0 && max / min <= MAX_CONDITION
}

/// Grow the ring parameter until the quadratic fit around vertex `i` is
/// well posed: at least 7 members and a design matrix with full column
/// rank and bounded condition number.
pub fn select_patch(
    mesh: &SurfaceMesh,
    i: usize,
    frame: &LocalFrame,
) -> Result<PatchProjection, RecoveryError> {
    let center = mesh.vertex(i);
    for k in 1..=MAX_RING {
        let patch = vertex_patch(mesh, i, k);
        if patch.members.len() < MIN_PATCH_MEMBERS {
            continue;
        }
        let coords: Vec<Vector2<f64>> = patch
            .members
            .iter()
            .map(|&v| {
                let d = mesh.vertex(v) - center;
                Vector2::new(frame.t1.dot(&d), frame.t2.dot(&d))
            })
            .collect();
        let heights: Vec<f64> =
            patch.members.iter().map(|&v| frame.normal.dot(&(mesh.vertex(v) - center))).collect();
        let scale = coords.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let design = patch_design(&coords, scale);
        if condition_ok(&design) {
            return Ok(PatchProjection { members: patch.members, coords, heights, scale });
        }
    }
    Err(RecoveryError::PatchRankDeficient { vertex: i, max_ring: MAX_RING })
}

/// Coefficients of a quadratic `q(z) = c0 + c1 z1 + c2 z2 + c3 z1^2
/// + c4 z1 z2 + c5 z2^2` in unscaled patch coordinates.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticFit {
    pub coeffs: [f64; 6],
    pub residual: f64,
}

impl QuadraticFit {
    pub fn value_at_center(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn gradient_at_center(&self) -> Vector2<f64> {
        Vector2::new(self.coeffs[1], self.coeffs[2])
    }
}

/// Least-squares quadratic through the patch data that is pinned to the
/// center value: `q(0)` equals the center datum exactly.
pub fn fit_quadratic_value_preserving(patch: &PatchProjection, data: &[f64]) -> QuadraticFit {
    let m = patch.coords.len() - 1;
    let design = patch_design(&patch.coords, patch.scale);
    let rhs = DVector::from_fn(m, |r, _| data[r + 1] - data[0]);
    let svd = design.svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).expect("svd solve");
    let residual_vec = patch_design(&patch.coords, patch.scale) * &sol - rhs;
    let s = patch.scale;
    QuadraticFit {
        coeffs: [
            data[0],
            sol[0] / s,
            sol[1] / s,
            sol[2] / (s * s),
            sol[3] / (s * s),
            sol[4] / (s * s),
        ],
        residual: residual_vec.norm(),
    }
}

/// Plain least-squares quadratic over all members, center included.
pub fn fit_quadratic_plain(patch: &PatchProjection, data: &[f64]) -> QuadraticFit {
    let m = patch.coords.len();
    let design = DMatrix::from_fn(m, 6, |r, c| {
        let z = patch.coords[r] / patch.scale;
        if c == 0 {
            1.0
        } else {
            design_rows(z)[c - 1]
        }
    });
    let rhs = DVector::from_fn(m, |r, _| data[r]);
    let svd = design.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).expect("svd solve");
    let residual_vec = design * &sol - rhs;
    let s = patch.scale;
    QuadraticFit {
        coeffs: [
            sol[0],
            sol[1] / s,
            sol[2] / s,
            sol[3] / (s * s),
            sol[4] / (s * s),
            sol[5] / (s * s),
        ],
        residual: residual_vec.norm(),
    }
}

fn patch_data(u: &ScalarField, members: &[usize]) -> Vec<f64> {
    members.iter().map(|&v| u.values[v]).collect()
}

/// Recovery with a fitted height map: the patch is charted over the plane
/// of an averaged-normal frame, a quadratic height map and a quadratic
/// data fit are computed, and the gradient is corrected by the induced
/// first fundamental form. Needs no exact geometry information.
pub fn recover_metric_corrected(
    mesh: &SurfaceMesh,
    u: &ScalarField,
) -> Result<VectorField, RecoveryError> {
    check_scalar(mesh, u)?;
    let values = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let n = vertex_normal(mesh, i, NormalMode::SimpleAverage, None)?;
            let frame = LocalFrame::from_normal(n);
            metric_corrected_at(mesh, u, i, &frame)
        })
        .collect::<Result<Vec<Vec3>, RecoveryError>>()?;
    Ok(VectorField { values, generation: u.generation })
}

/// Metric-corrected recovery at a single vertex in an explicitly supplied
/// frame; the result is invariant under in-plane rotations of the frame.
pub fn metric_corrected_at(
    mesh: &SurfaceMesh,
    u: &ScalarField,
    i: usize,
    frame: &LocalFrame,
) -> Result<Vec3, RecoveryError> {
    let patch = select_patch(mesh, i, frame)?;
    let s_fit = fit_quadratic_value_preserving(&patch, &patch.heights);
    let p_fit = fit_quadratic_value_preserving(&patch, &patch_data(u, &patch.members));
    let ds = s_fit.gradient_at_center();
    let dp = p_fit.gradient_at_center();
    // tangent vectors of the graph z -> z1 t1 + z2 t2 + s(z) n
    let r1 = frame.t1 + frame.normal * ds.x;
    let r2 = frame.t2 + frame.normal * ds.y;
    let g = Matrix2::new(r1.dot(&r1), r1.dot(&r2), r1.dot(&r2), r2.dot(&r2));
    let ginv = g.try_inverse().expect("first fundamental form is invertible");
    let a = ginv * dp;
    Ok(r1 * a.x + r2 * a.y)
}

/// Tangent-plane recovery: quadratic data fit in the frame plane, gradient
/// read off in the plane with no metric correction. Normals come from the
/// level set (`Exact`) or from face averaging.
pub fn recover_tangent_plane(
    mesh: &SurfaceMesh,
    u: &ScalarField,
    mode: NormalMode,
    surface: Option<&LevelSetSurface>,
    value_preserving: bool,
) -> Result<VectorField, RecoveryError> {
    check_scalar(mesh, u)?;
    let values = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let n = vertex_normal(mesh, i, mode, surface)?;
            let frame = LocalFrame::from_normal(n);
            let patch = select_patch(mesh, i, &frame)?;
            let data = patch_data(u, &patch.members);
            let fit = if value_preserving {
                fit_quadratic_value_preserving(&patch, &data)
            } else {
                fit_quadratic_plain(&patch, &data)
            };
            let dp = fit.gradient_at_center();
            Ok(frame.t1 * dp.x + frame.t2 * dp.y)
        })
        .collect::<Result<Vec<Vec3>, RecoveryError>>()?;
    Ok(VectorField { values, generation: u.generation })
}

/// Per-vertex averaging of the face gradients, plain or area-weighted.
pub fn recover_averaging(
    mesh: &SurfaceMesh,
    grad: &FaceField,
    area_weighted: bool,
) -> Result<VectorField, RecoveryError> {
    if grad.generation != mesh.generation() {
        return Err(FemError::GenerationMismatch {
            field: grad.generation,
            mesh: mesh.generation(),
        }
        .into());
    }
    let values = (0..mesh.num_vertices())
        .map(|i| {
            let mut sum = Vec3::zeros();
            let mut total = 0.0;
            for &j in mesh.incident_triangles(i) {
                let w = if area_weighted { mesh.triangle_area(j) } else { 1.0 };
                sum += grad.values[j] * w;
                total += w;
            }
            sum / total
        })
        .collect();
    Ok(VectorField { values, generation: grad.generation })
}

/// Recovery operators selectable by name on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryMethod {
    /// Height-map fit with metric correction, averaged normals.
    MetricCorrected,
    /// Tangent-plane fit with level-set normals.
    TangentPlaneExact,
    /// Tangent-plane fit with averaged normals.
    TangentPlaneAveraged,
    /// Arithmetic mean of incident face gradients.
    SimpleAveraging,
    /// Area-weighted mean of incident face gradients.
    WeightedAveraging,
}

impl RecoveryMethod {
    pub fn from_name(name: &str) -> Result<Self, RecoveryError> {
        match name {
            "pppr" => Ok(RecoveryMethod::MetricCorrected),
            "ppr-exact" => Ok(RecoveryMethod::TangentPlaneExact),
            "ppr-avg" => Ok(RecoveryMethod::TangentPlaneAveraged),
            "sa" => Ok(RecoveryMethod::SimpleAveraging),
            "wa" => Ok(RecoveryMethod::WeightedAveraging),
            other => Err(RecoveryError::UnknownMethod(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RecoveryMethod::MetricCorrected => "pppr",
            RecoveryMethod::TangentPlaneExact => "ppr-exact",
            RecoveryMethod::TangentPlaneAveraged => "ppr-avg",
            RecoveryMethod::SimpleAveraging => "sa",
            RecoveryMethod::WeightedAveraging => "wa",
        }
    }

    pub fn all() -> [RecoveryMethod; 5] {
        [
            RecoveryMethod::MetricCorrected,
            RecoveryMethod::TangentPlaneExact,
            RecoveryMethod::TangentPlaneAveraged,
            RecoveryMethod::SimpleAveraging,
            RecoveryMethod::WeightedAveraging,
        ]
    }

    pub fn apply(
        &self,
        mesh: &SurfaceMesh,
        u: &ScalarField,
        surface: Option<&LevelSetSurface>,
    ) -> Result<VectorField, RecoveryError> {
        match self {
            RecoveryMethod::MetricCorrected => recover_metric_corrected(mesh, u),
            RecoveryMethod::TangentPlaneExact => {
                recover_tangent_plane(mesh, u, NormalMode::Exact, surface, true)
            }
            RecoveryMethod::TangentPlaneAveraged => {
                recover_tangent_plane(mesh, u, NormalMode::SimpleAverage, None, true)
            }
            RecoveryMethod::SimpleAveraging => {
                let g = fe_gradient(mesh, u)?;
                recover_averaging(mesh, &g, false)
            }
            RecoveryMethod::WeightedAveraging => {
                let g = fe_gradient(mesh, u)?;
                recover_averaging(mesh, &g, true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ManufacturedProblem, PROJECTION_TOL};
    use crate::mesh::{build_mesh, chevron_torus_mesh, projected_icosphere};
    use proptest::prelude::*;

    /// Closed flat-top test surface: a coarse double pyramid whose equator
    /// ring lies in the z = 0 plane, so patches around equator vertices of
    /// the top cap are genuinely two-dimensional.
    fn flat_disk_mesh(rings: usize) -> SurfaceMesh {
        // flat triangulated square closed into a surface by a single apex
        // below its boundary ring; recovery tests only look at interior
        // top vertices, whose patches are entirely flat
        let n = rings;
        let mut vertices = Vec::new();
        let mut index = vec![vec![0usize; n + 1]; n + 1];
        for iy in 0..=n {
            for ix in 0..=n {
                index[iy][ix] = vertices.len();
                vertices.push(Vec3::new(ix as f64, iy as f64, 0.0));
            }
        }
        let top = |iy: usize, ix: usize| index[iy][ix];
        let mut triangles = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let (a, b, c, d) =
                    (top(iy, ix), top(iy, ix + 1), top(iy + 1, ix + 1), top(iy + 1, ix));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        // boundary directed edges appear in exactly one triangle; close the
        // surface with an apex fan in the opposite direction
        let mut edge_count = std::collections::HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                *edge_count.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let apex = vertices.len();
        vertices.push(Vec3::new(n as f64 / 2.0, n as f64 / 2.0, -(n as f64)));
        let boundary: Vec<(usize, usize)> = edge_count
            .keys()
            .filter(|&&(u, v)| !edge_count.contains_key(&(v, u)))
            .copied()
            .collect();
        for (u, v) in boundary {
            triangles.push([v, u, apex]);
        }
        build_mesh(vertices, triangles).unwrap()
    }

    fn center_vertex(_mesh: &SurfaceMesh, rings: usize) -> usize {
        // the top grid is stored first, row-major
        (rings / 2) * (rings + 1) + rings / 2
    }

    #[test]
    fn frame_is_right_handed_orthonormal() {
        for n in [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 2.0, 3.0).normalize(),
            Vec3::new(-0.3, 0.9, -0.4).normalize(),
        ] {
            let f = LocalFrame::from_normal(n);
            assert!((f.t1.norm() - 1.0).abs() < 1e-14);
            assert!((f.t2.norm() - 1.0).abs() < 1e-14);
            assert!(f.t1.dot(&f.t2).abs() < 1e-14);
            assert!(f.t1.dot(&f.normal).abs() < 1e-14);
            assert!((f.t1.cross(&f.t2) - f.normal).norm() < 1e-14);
        }
    }

    #[test]
    fn planar_quadratic_is_reproduced_exactly() {
        let rings = 8;
        let mesh = flat_disk_mesh(rings);
        let q = |v: Vec3| 0.7 + 1.3 * v.x - 0.4 * v.y + 0.25 * v.x * v.x
            - 0.6 * v.x * v.y + 0.15 * v.y * v.y;
        let gq = |v: Vec3| Vec3::new(1.3 + 0.5 * v.x - 0.6 * v.y, -0.4 - 0.6 * v.x + 0.3 * v.y, 0.0);
        let u = ScalarField {
            values: mesh.vertices().iter().map(|&v| q(v)).collect(),
            generation: 0,
        };
        let i = center_vertex(&mesh, rings);
        let n = vertex_normal(&mesh, i, NormalMode::SimpleAverage, None).unwrap();
        assert!((n - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let frame = LocalFrame::from_normal(n);
        let patch = select_patch(&mesh, i, &frame).unwrap();
        let data = patch_data(&u, &patch.members);
        let fit = fit_quadratic_value_preserving(&patch, &data);
        let dp = fit.gradient_at_center();
        let rec = frame.t1 * dp.x + frame.t2 * dp.y;
        assert!((rec - gq(mesh.vertex(i))).norm() < 1e-10, "{rec:?}");
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_preserves_center_value() {
        let rings = 8;
        let mesh = flat_disk_mesh(rings);
        let i = center_vertex(&mesh, rings);
        let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
        let patch = select_patch(&mesh, i, &frame).unwrap();
        // rough data that no quadratic matches
        let data: Vec<f64> =
            patch.members.iter().map(|&v| ((v * 37 + 11) % 101) as f64 / 17.0).collect();
        let fit = fit_quadratic_value_preserving(&patch, &data);
        assert!((fit.value_at_center() - data[0]).abs() < 1e-14);
        assert!(fit.residual > 0.0);
    }

    #[test]
    fn plain_fit_need_not_preserve_center_value() {
        let rings = 8;
        let mesh = flat_disk_mesh(rings);
        let i = center_vertex(&mesh, rings);
        let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
        let patch = select_patch(&mesh, i, &frame).unwrap();
        let data: Vec<f64> =
            patch.members.iter().map(|&v| ((v * 53 + 7) % 97) as f64 / 13.0).collect();
        let fit = fit_quadratic_plain(&patch, &data);
        assert!((fit.value_at_center() - data[0]).abs() > 1e-6);
    }

    #[test]
    fn metric_correction_vanishes_on_flat_patches() {
        // on a flat region the height map is zero, so both recoveries agree
        let rings = 8;
        let mesh = flat_disk_mesh(rings);
        let u = ScalarField {
            values: mesh.vertices().iter().map(|v| (0.3 * v.x + 0.9 * v.y).sin()).collect(),
            generation: 0,
        };
        let a = recover_metric_corrected(&mesh, &u).unwrap();
        let b = recover_tangent_plane(&mesh, &u, NormalMode::SimpleAverage, None, true).unwrap();
        let i = center_vertex(&mesh, rings);
        assert!((a.values[i] - b.values[i]).norm() < 1e-12);
    }

    #[test]
    fn recovered_gradient_scales_linearly() {
        let mesh = chevron_torus_mesh(16, 8).unwrap();
        let u = ScalarField {
            values: mesh.vertices().iter().map(|v| v.x * v.y).collect(),
            generation: 0,
        };
        let scaled = ScalarField {
            values: u.values.iter().map(|x| 4.0 * x).collect(),
            generation: 0,
        };
        let a = recover_metric_corrected(&mesh, &u).unwrap();
        let b = recover_metric_corrected(&mesh, &scaled).unwrap();
        for (va, vb) in a.values.iter().zip(&b.values) {
            assert!((vb - va * 4.0).norm() < 1e-12 * (1.0 + vb.norm()));
        }
    }

    #[test]
    fn recovered_gradient_is_tangent_to_frame() {
        let mesh = chevron_torus_mesh(16, 8).unwrap();
        let u = ScalarField {
            values: mesh.vertices().iter().map(|v| v.x - v.y).collect(),
            generation: 0,
        };
        let g = recover_tangent_plane(&mesh, &u, NormalMode::SimpleAverage, None, true).unwrap();
        for i in 0..mesh.num_vertices() {
            let n = vertex_normal(&mesh, i, NormalMode::SimpleAverage, None).unwrap();
            assert!(g.values[i].dot(&n).abs() < 1e-12 * (1.0 + g.values[i].norm()));
        }
    }

    #[test]
    fn averaging_of_constant_gradient_is_constant() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let c = Vec3::new(0.4, -1.0, 0.7);
        let grad = FaceField { values: vec![c; mesh.num_triangles()], generation: 0 };
        for weighted in [false, true] {
            let g = recover_averaging(&mesh, &grad, weighted).unwrap();
            for v in &g.values {
                assert!((v - c).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn convergence_on_torus_beats_face_gradient() {
        // recovery applied to the interpolant of a smooth function should be
        // markedly more accurate than the raw face gradients
        let problem = ManufacturedProblem::torus_xy();
        let surface = problem.surface();
        let mesh = chevron_torus_mesh(80, 40).unwrap();
        let u = crate::fem::interpolate(&mesh, &problem).unwrap();
        let rec = recover_metric_corrected(&mesh, &u).unwrap();
        let mut worst = 0.0f64;
        for (i, &v) in mesh.vertices().iter().enumerate() {
            let p = surface.project_closest_point(v, PROJECTION_TOL).unwrap();
            let tg = problem.tangential_gradient(p).unwrap();
            worst = worst.max((rec.values[i] - tg).norm());
        }
        let norms = crate::fem::error_norms(&mesh, &problem, &u, Some(&rec)).unwrap();
        assert!(
            norms.de_recovered.unwrap() < 0.2 * norms.de,
            "recovered {} vs fe {}",
            norms.de_recovered.unwrap(),
            norms.de
        );
        assert!(worst < 0.1, "max nodal error {worst}");
    }

    #[test]
    fn sphere_recovery_superconvergence() {
        let surface = LevelSetSurface::unit_sphere();
        let mesh = projected_icosphere(3, &surface).unwrap();
        // u = x restricted to the sphere; tangential gradient e_x - (n.e_x) n
        let u = ScalarField {
            values: mesh.vertices().iter().map(|v| v.x).collect(),
            generation: mesh.generation(),
        };
        let rec = recover_metric_corrected(&mesh, &u).unwrap();
        let mut worst = 0.0f64;
        for (i, v) in mesh.vertices().iter().enumerate() {
            let n = v.normalize();
            let tg = Vec3::new(1.0, 0.0, 0.0) - n * n.x;
            worst = worst.max((rec.values[i] - tg).norm());
        }
        assert!(worst < 0.02, "max nodal error {worst}");
    }

    #[test]
    fn method_registry_round_trips() {
        for m in RecoveryMethod::all() {
            assert_eq!(RecoveryMethod::from_name(m.name()).unwrap(), m);
        }
        assert!(RecoveryMethod::from_name("zz").is_err());
    }

    proptest! {
        #[test]
        fn fit_reproduces_random_quadratics(
            c in prop::array::uniform6(-2.0f64..2.0),
        ) {
            let rings = 6;
            let mesh = flat_disk_mesh(rings);
            let i = center_vertex(&mesh, rings);
            let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
            let patch = select_patch(&mesh, i, &frame).unwrap();
            let center = mesh.vertex(i);
            let q = |v: Vec3| {
                let (x, y) = (v.x - center.x, v.y - center.y);
                c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
            };
            let data: Vec<f64> =
                patch.members.iter().map(|&v| q(mesh.vertex(v))).collect();
            let fit = fit_quadratic_value_preserving(&patch, &data);
            let dp = fit.gradient_at_center();
            prop_assert!((dp.x - c[1]).abs() < 1e-8 * (1.0 + c[1].abs()));
            prop_assert!((dp.y - c[2]).abs() < 1e-8 * (1.0 + c[2].abs()));
        }

        #[test]
        fn recovery_is_linear_in_the_data(
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let mesh = chevron_torus_mesh(8, 8).unwrap();
            let u: Vec<f64> = mesh.vertices().iter().map(|v| v.x).collect();
            let w: Vec<f64> = mesh.vertices().iter().map(|v| v.y * v.z).collect();
            let combo: Vec<f64> =
                u.iter().zip(&w).map(|(a, b)| alpha * a + beta * b).collect();
            let fu = ScalarField { values: u, generation: 0 };
            let fw = ScalarField { values: w, generation: 0 };
            let fc = ScalarField { values: combo, generation: 0 };
            let ru = recover_tangent_plane(&mesh, &fu, NormalMode::SimpleAverage, None, true).unwrap();
            let rw = recover_tangent_plane(&mesh, &fw, NormalMode::SimpleAverage, None, true).unwrap();
            let rc = recover_tangent_plane(&mesh, &fc, NormalMode::SimpleAverage, None, true).unwrap();
            for i in 0..rc.values.len() {
                let lin = ru.values[i] * alpha + rw.values[i] * beta;
                prop_assert!((rc.values[i] - lin).norm() < 1e-10 * (1.0 + lin.norm()));
            }
        }
    }
}
