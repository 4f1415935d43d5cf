//! Indexed triangle meshes of closed oriented 2-manifolds: construction with
//! manifold validation, benchmark generators, refinement and patch queries.

mod bisect;
pub mod io;

pub use bisect::bisect_marked;
pub use io::{export_mesh, export_vtk, import_mesh, FieldData, MeshFormat};

use std::collections::HashMap;

use crate::geometry::{GeometryError, LevelSetSurface, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("vertex index {index} out of range (vertex count {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("duplicate triangle ({0}, {1}, {2})")]
    DuplicateTriangle(usize, usize, usize),
    #[error("non-manifold edge ({a}, {b}) with {count} incident triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("inconsistent orientation: directed edge ({a}, {b}) traversed twice")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("degenerate triangle {index} (area {area:.3e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("invalid generator parameters: {0}")]
    ParameterRange(String),
    #[error("ray from origin along ({0:.4}, {1:.4}, {2:.4}) does not hit the surface")]
    RayMiss(f64, f64, f64),
    #[error("bisection closure exceeded {0} splits; refinement-edge state corrupted")]
    ClosureOverflow(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown mesh format '{0}'")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed oriented triangle mesh with adjacency.
///
/// Immutable after construction; refinement operations return a new mesh.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    /// CSR adjacency: triangles incident to vertex `i` are
    /// `tri_incidence[tri_offsets[i]..tri_offsets[i + 1]]`.
    tri_offsets: Vec<usize>,
    tri_incidence: Vec<usize>,
    /// Undirected edges (min, max), sorted; lookups by binary search.
    edges: Vec<(usize, usize)>,
    /// The two incident triangles per edge, parallel to `edges`.
    edge_tris: Vec<[usize; 2]>,
    /// Per-triangle local index k of the refinement edge (the edge opposite
    /// vertex k), for newest-vertex bisection.
    refinement_edges: Vec<u8>,
    generation: u32,
}

/// Vertices within Euclidean distance `k * h_i` of a center vertex.
#[derive(Clone, Debug)]
pub struct VertexPatch {
    pub center: usize,
    pub ring_parameter: usize,
    /// Center listed first.
    pub members: Vec<usize>,
    /// Length of the longest edge incident to the center.
    pub h_center: f64,
}

fn triangle_area_normal(a: Vec3, b: Vec3, c: Vec3) -> (f64, Vec3) {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    (0.5 * len, if len > 0.0 { n / len } else { Vec3::zeros() })
}

/// Validate and index a triangle soup. Refinement edges default to the
/// longest edge of each triangle.
pub fn build_mesh(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<SurfaceMesh, MeshError> {
    SurfaceMesh::assemble(vertices, triangles, None, 0)
}

impl SurfaceMesh {
    fn assemble(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        refinement_edges: Option<Vec<u8>>,
        generation: u32,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for t in &triangles {
            for &i in t {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange { index: i, count: nv });
                }
            }
        }
        {
            let mut keys: Vec<[usize; 3]> = triangles
                .iter()
                .map(|t| {
                    let mut key = *t;
                    key.sort_unstable();
                    key
                })
                .collect();
            keys.sort_unstable();
            if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
                return Err(MeshError::DuplicateTriangle(w[0][0], w[0][1], w[0][2]));
            }
        }

        // bounding box for the degeneracy scale
        let mut lo = Vec3::from_element(f64::INFINITY);
        let mut hi = Vec3::from_element(f64::NEG_INFINITY);
        for v in &vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let bbox_sq = (hi - lo).norm_squared().max(1.0);

        for (j, t) in triangles.iter().enumerate() {
            let (area, _) = triangle_area_normal(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area < 1e-14 * bbox_sq {
                return Err(MeshError::DegenerateTriangle { index: j, area });
            }
        }

        {
            let mut directed: Vec<(usize, usize)> = Vec::with_capacity(3 * triangles.len());
            for t in &triangles {
                for k in 0..3 {
                    directed.push((t[k], t[(k + 1) % 3]));
                }
            }
            directed.sort_unstable();
            if let Some(w) = directed.windows(2).find(|w| w[0] == w[1]) {
                return Err(MeshError::InconsistentOrientation { a: w[0].0, b: w[0].1 });
            }
        }

        let mut undirected: Vec<((usize, usize), usize)> = Vec::with_capacity(3 * triangles.len());
        for (j, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                undirected.push(((a.min(b), a.max(b)), j));
            }
        }
        undirected.sort_unstable();
        let mut edges = Vec::with_capacity(undirected.len() / 2);
        let mut edge_tris = Vec::with_capacity(undirected.len() / 2);
        let mut pos = 0;
        while pos < undirected.len() {
            let key = undirected[pos].0;
            let mut end = pos + 1;
            while end < undirected.len() && undirected[end].0 == key {
                end += 1;
            }
            if end - pos != 2 {
                return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1, count: end - pos });
            }
            edges.push(key);
            edge_tris.push([undirected[pos].1, undirected[pos + 1].1]);
            pos = end;
        }
        drop(undirected);

        let mut tri_offsets = vec![0usize; nv + 1];
        for t in &triangles {
            for &i in t {
                tri_offsets[i + 1] += 1;
            }
        }
        for i in 0..nv {
            tri_offsets[i + 1] += tri_offsets[i];
        }
        let mut tri_incidence = vec![0usize; 3 * triangles.len()];
        let mut cursor = tri_offsets.clone();
        for (j, t) in triangles.iter().enumerate() {
            for &i in t {
                tri_incidence[cursor[i]] = j;
                cursor[i] += 1;
            }
        }

        let refinement_edges = match refinement_edges {
            Some(r) => {
                debug_assert_eq!(r.len(), triangles.len());
                r
            }
            None => triangles
                .iter()
                .map(|t| {
                    let mut best = 0u8;
                    let mut best_len = -1.0;
                    for k in 0..3usize {
                        let a = vertices[t[(k + 1) % 3]];
                        let b = vertices[t[(k + 2) % 3]];
                        let len = (a - b).norm();
                        if len > best_len {
                            best_len = len;
                            best = k as u8;
                        }
                    }
                    best
                })
                .collect(),
        };

        Ok(SurfaceMesh {
            vertices,
            triangles,
            tri_offsets,
            tri_incidence,
            edges,
            edge_tris,
            refinement_edges,
            generation,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges (min, max) in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Rank of edge (a, b) in the sorted edge list.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).ok()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    pub fn triangle(&self, j: usize) -> [usize; 3] {
        self.triangles[j]
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn refinement_edge(&self, j: usize) -> u8 {
        self.refinement_edges[j]
    }

    pub fn incident_triangles(&self, i: usize) -> &[usize] {
        &self.tri_incidence[self.tri_offsets[i]..self.tri_offsets[i + 1]]
    }

    pub fn triangle_area(&self, j: usize) -> f64 {
        let t = self.triangles[j];
        triangle_area_normal(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]).0
    }

    /// Outward unit normal of triangle `j` under the mesh orientation.
    pub fn triangle_normal(&self, j: usize) -> Vec3 {
        let t = self.triangles[j];
        triangle_area_normal(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]).1
    }

    pub fn triangle_barycenter(&self, j: usize) -> Vec3 {
        let t = self.triangles[j];
        (self.vertices[t[0]] + self.vertices[t[1]] + self.vertices[t[2]]) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|j| self.triangle_area(j)).sum()
    }

    /// Longest edge length over the whole mesh.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    /// The triangle sharing edge (a, b) with triangle `j`.
    pub fn neighbor_across(&self, j: usize, a: usize, b: usize) -> Option<usize> {
        let pair = &self.edge_tris[self.edge_index(a, b)?];
        if pair[0] == j {
            Some(pair[1])
        } else if pair[1] == j {
            Some(pair[0])
        } else {
            None
        }
    }

    /// Vertex indices connected to `i` by an edge, sorted.
    pub fn vertex_neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &j in self.incident_triangles(i) {
            for &v in &self.triangles[j] {
                if v != i && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Longest edge incident to vertex `i`.
    pub fn h_at_vertex(&self, i: usize) -> f64 {
        self.vertex_neighbors(i)
            .iter()
            .map(|&j| (self.vertices[i] - self.vertices[j]).norm())
            .fold(0.0, f64::max)
    }
}

/// Doubly-periodic chevron grid mapped onto the torus
/// `((4 + cos v) cos u, (4 + cos v) sin u, sin v)`.
///
/// The cell diagonal alternates per column and is constant along rows, so
/// element patches are deliberately not O(h^2)-symmetric.
pub fn chevron_torus_mesh(n_u: usize, n_v: usize) -> Result<SurfaceMesh, MeshError> {
    if n_u < 4 || n_v < 4 || n_u % 2 != 0 || n_v % 2 != 0 {
        return Err(MeshError::ParameterRange(format!(
            "chevron grid needs even n_u, n_v >= 4, got ({n_u}, {n_v})"
        )));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut vertices = Vec::with_capacity(n_u * n_v);
    for i in 0..n_u {
        let u = tau * i as f64 / n_u as f64;
        for j in 0..n_v {
            let v = tau * j as f64 / n_v as f64;
            let r = 4.0 + v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % n_u) * n_v + (j % n_v);
    let mut triangles = Vec::with_capacity(2 * n_u * n_v);
    for i in 0..n_u {
        for j in 0..n_v {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            if i % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    build_mesh(vertices, triangles)
}

const ICO_T: f64 = 1.618033988749895; // golden ratio

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = ICO_T;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let vertices: Vec<Vec3> = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, triangles)
}

/// Subdivided icosahedron directions ray-cast from the origin onto the
/// surface; requires the surface to be star-shaped with respect to the origin.
pub fn projected_icosphere(level: usize, surface: &LevelSetSurface) -> Result<SurfaceMesh, MeshError> {
    let (mut dirs, mut tris) = icosahedron();
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_tris = Vec::with_capacity(4 * tris.len());
        for t in &tris {
            let mut mids = [0usize; 3];
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                mids[k] = *midpoints.entry(key).or_insert_with(|| {
                    let m = ((dirs[a] + dirs[b]) * 0.5).normalize();
                    dirs.push(m);
                    dirs.len() - 1
                });
            }
            new_tris.push([t[0], mids[0], mids[2]]);
            new_tris.push([mids[0], t[1], mids[1]]);
            new_tris.push([mids[2], mids[1], t[2]]);
            new_tris.push([mids[0], mids[1], mids[2]]);
        }
        tris = new_tris;
    }

    let (lo, hi) = surface.bounding_box();
    let t_max = lo.norm().max(hi.norm()) + 1.0;
    let vertices: Result<Vec<Vec3>, MeshError> = dirs
        .iter()
        .map(|&d| {
            let t = raycast_bisection(surface, d, t_max)
                .ok_or(MeshError::RayMiss(d.x, d.y, d.z))?;
            Ok(d * t)
        })
        .collect();
    build_mesh(vertices?, tris)
}

/// Find t in (0, t_max] with phi(t d) = 0 by scan plus bisection.
fn raycast_bisection(surface: &LevelSetSurface, d: Vec3, t_max: f64) -> Option<f64> {
    const SCAN: usize = 256;
    let mut t_prev = 1e-6 * t_max;
    let mut f_prev = surface.phi(d * t_prev);
    let mut bracket = None;
    for k in 1..=SCAN {
        let t = t_max * k as f64 / SCAN as f64;
        let f = surface.phi(d * t);
        if f_prev.signum() != f.signum() {
            bracket = Some((t_prev, t, f_prev));
            break;
        }
        t_prev = t;
        f_prev = f;
    }
    let (mut a, mut b, fa) = bracket?;
    let mut fa = fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = surface.phi(d * m);
        if fm.abs() <= 1e-13 || (b - a) < 1e-15 {
            return Some(m);
        }
        if fa.signum() == fm.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Red refinement: each triangle is split into 4 by its edge midpoints.
/// When a surface is supplied, the new vertices are moved onto the level
/// set by the iterated projection (a single first-order step can leave a
/// residual of the coarse chord scale that would then persist through all
/// finer levels); existing vertices stay put.
pub fn uniform_refine(
    mesh: &SurfaceMesh,
    surface: Option<&LevelSetSurface>,
) -> Result<SurfaceMesh, MeshError> {
    use rayon::prelude::*;
    let nv = mesh.num_vertices();
    // one new vertex per edge, identified by the edge's rank
    let midpoints: Result<Vec<Vec3>, MeshError> = mesh
        .edges
        .par_iter()
        .map(|&(a, b)| {
            let m = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
            match surface {
                Some(s) => Ok(s.project_closest_point(m, crate::geometry::PROJECTION_TOL)?),
                None => Ok(m),
            }
        })
        .collect();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(midpoints?);
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for t in &mesh.triangles {
        let mut mids = [0usize; 3];
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            mids[k] = nv + mesh.edge_index(a, b).expect("triangle edge present in edge list");
        }
        triangles.push([t[0], mids[0], mids[2]]);
        triangles.push([mids[0], t[1], mids[1]]);
        triangles.push([mids[2], mids[1], t[2]]);
        triangles.push([mids[0], mids[1], mids[2]]);
    }
    SurfaceMesh::assemble(vertices, triangles, None, mesh.generation + 1)
}

/// BFS-bounded Euclidean ball query around vertex `i` with radius `k * h_i`.
pub fn vertex_patch(mesh: &SurfaceMesh, i: usize, k: usize) -> VertexPatch {
    assert!(k >= 1, "ring parameter must be at least 1");
    let h_i = mesh.h_at_vertex(i);
    let radius = k as f64 * h_i;
    let center = mesh.vertex(i);
    let mut members = vec![i];
    let mut visited = vec![i];
    let mut frontier = vec![i];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for n in mesh.vertex_neighbors(v) {
                if visited.contains(&n) {
                    continue;
                }
                visited.push(n);
                if (mesh.vertex(n) - center).norm() <= radius {
                    members.push(n);
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    members[1..].sort_unstable();
    VertexPatch { center: i, ring_parameter: k, members, h_center: h_i }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
        let vertices = vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ];
        // outward-oriented faces
        let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        (vertices, triangles)
    }

    #[test]
    fn tetrahedron_is_valid() {
        let (v, t) = tetrahedron();
        let mesh = build_mesh(v, t).unwrap();
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_edges(), 6);
        assert_eq!(mesh.num_triangles(), 4);
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn boundary_edges_are_rejected() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let triangles = vec![[0, 1, 2], [2, 1, 3]];
        let err = build_mesh(vertices, triangles).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { count: 1, .. }), "{err}");
    }

    #[test]
    fn flipped_orientation_is_rejected() {
        let (v, mut t) = tetrahedron();
        t[3] = [1, 2, 3]; // reversed
        let err = build_mesh(v, t).unwrap_err();
        assert!(matches!(err, MeshError::InconsistentOrientation { .. }), "{err}");
    }

    #[test]
    fn icosahedron_counts() {
        let (v, t) = icosahedron();
        let mesh = build_mesh(v, t).unwrap();
        assert_eq!(mesh.num_vertices(), 12);
        assert_eq!(mesh.num_edges(), 30);
        assert_eq!(mesh.num_triangles(), 20);
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn chevron_counts_and_exactness() {
        let mesh = chevron_torus_mesh(20, 10).unwrap();
        assert_eq!(mesh.num_vertices(), 200);
        assert_eq!(mesh.num_triangles(), 400);
        assert_eq!(mesh.euler_characteristic(), 0);
        let torus = LevelSetSurface::torus();
        for v in mesh.vertices() {
            assert!(torus.phi(*v).abs() <= 1e-13);
        }
        let next = chevron_torus_mesh(40, 20).unwrap();
        assert_eq!(next.num_vertices(), 800);
    }

    #[test]
    fn chevron_normals_point_outward() {
        let mesh = chevron_torus_mesh(20, 10).unwrap();
        let torus = LevelSetSurface::torus();
        for j in 0..mesh.num_triangles() {
            let n = mesh.triangle_normal(j);
            let c = mesh.triangle_barycenter(j);
            let exact = torus.unit_normal(torus.project_closest_point(c, 1e-12).unwrap()).unwrap();
            assert!(n.dot(&exact) > 0.5, "triangle {j} flipped");
        }
    }

    #[test]
    fn chevron_parameter_validation() {
        assert!(matches!(chevron_torus_mesh(3, 10), Err(MeshError::ParameterRange(_))));
        assert!(matches!(chevron_torus_mesh(20, 5), Err(MeshError::ParameterRange(_))));
    }

    #[test]
    fn icosphere_on_unit_sphere() {
        let sphere = LevelSetSurface::unit_sphere();
        let m0 = projected_icosphere(0, &sphere).unwrap();
        assert_eq!(m0.num_vertices(), 12);
        assert_eq!(m0.num_triangles(), 20);
        for v in m0.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let m1 = projected_icosphere(1, &sphere).unwrap();
        assert_eq!(m1.num_vertices(), 42);
        assert_eq!(m1.num_triangles(), 80);
    }

    #[test]
    fn icosphere_on_dziuk() {
        let dziuk = LevelSetSurface::dziuk();
        let m = projected_icosphere(0, &dziuk).unwrap();
        assert_eq!(m.num_vertices(), 12);
        for v in m.vertices() {
            assert!(dziuk.phi(*v).abs() <= 1e-12, "phi = {}", dziuk.phi(*v));
        }
    }

    #[test]
    fn icosphere_on_highcurv() {
        let s = LevelSetSurface::high_curvature();
        let m = projected_icosphere(2, &s).unwrap();
        assert_eq!(m.num_vertices(), 162);
        for v in m.vertices() {
            assert!(s.phi(*v).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_refine_counts() {
        let (v, t) = tetrahedron();
        let mesh = build_mesh(v, t).unwrap();
        let fine = uniform_refine(&mesh, None).unwrap();
        assert_eq!(fine.num_triangles(), 16);
        assert_eq!(fine.num_vertices(), 4 + 6);
        assert_eq!(fine.generation(), 1);
    }

    #[test]
    fn uniform_refine_midpoints_are_chords_without_surface() {
        let mesh = chevron_torus_mesh(8, 8).unwrap();
        let fine = uniform_refine(&mesh, None).unwrap();
        // every new vertex is the midpoint of some coarse edge
        for v in &fine.vertices()[mesh.num_vertices()..] {
            let mut found = false;
            'outer: for a in 0..mesh.num_vertices() {
                for b in (a + 1)..mesh.num_vertices() {
                    let m = (mesh.vertex(a) + mesh.vertex(b)) * 0.5;
                    if (m - v).norm() < 1e-12 {
                        found = true;
                        break 'outer;
                    }
                }
            }
            assert!(found);
        }
    }

    #[test]
    fn projected_refine_decays_phi_quadratically() {
        // refinement projects new vertices onto the level set, so the phi
        // residual stays at the projection tolerance on every surface
        let torus = LevelSetSurface::torus();
        let base = chevron_torus_mesh(20, 10).unwrap();
        let fine = uniform_refine(&base, Some(&torus)).unwrap();
        let max_phi = fine.vertices().iter().map(|v| torus.phi(*v).abs()).fold(0.0, f64::max);
        assert!(max_phi < 1e-10, "{max_phi}");

        let dziuk = LevelSetSurface::dziuk();
        let mut mesh = projected_icosphere(1, &dziuk).unwrap();
        for _ in 0..3 {
            mesh = uniform_refine(&mesh, Some(&dziuk)).unwrap();
            let max_phi = mesh.vertices().iter().map(|v| dziuk.phi(*v).abs()).fold(0.0, f64::max);
            assert!(max_phi < 1e-10, "{max_phi}");
        }
    }

    #[test]
    fn torus_area_converges_second_order() {
        let exact = 16.0 * std::f64::consts::PI * std::f64::consts::PI;
        let mut errs = Vec::new();
        for lvl in 0..3 {
            let mesh = chevron_torus_mesh(20 << lvl, 10 << lvl).unwrap();
            errs.push((mesh.total_area() - exact).abs());
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!((o1 - 2.0).abs() < 0.25, "order {o1}");
        assert!((o2 - 2.0).abs() < 0.15, "order {o2}");
    }

    #[test]
    fn patch_matches_brute_force() {
        let sphere = LevelSetSurface::unit_sphere();
        let mesh = projected_icosphere(2, &sphere).unwrap();
        for &i in &[0usize, 17, 90, 161] {
            for k in 1..=3usize {
                let patch = vertex_patch(&mesh, i, k);
                let radius = k as f64 * mesh.h_at_vertex(i);
                let mut brute: Vec<usize> = (0..mesh.num_vertices())
                    .filter(|&j| (mesh.vertex(j) - mesh.vertex(i)).norm() <= radius)
                    .collect();
                brute.retain(|&j| j != i);
                let mut got = patch.members[1..].to_vec();
                got.sort_unstable();
                assert_eq!(got, brute, "vertex {i}, k {k}");
                assert_eq!(patch.members[0], i);
            }
        }
    }

    #[test]
    fn patch_covers_whole_mesh_for_large_k() {
        let (v, t) = tetrahedron();
        let mesh = build_mesh(v, t).unwrap();
        let patch = vertex_patch(&mesh, 0, 10);
        assert_eq!(patch.members.len(), 4);
    }

    #[test]
    fn patch_members_within_radius() {
        let mesh = chevron_torus_mesh(12, 8).unwrap();
        let patch = vertex_patch(&mesh, 30, 2);
        let c = mesh.vertex(30);
        for &m in &patch.members {
            assert!((mesh.vertex(m) - c).norm() <= 2.0 * patch.h_center + 1e-12);
        }
        assert!(patch.members.len() >= 6);
    }
}
