//! Newest-vertex bisection with recursive conformity closure.

use std::collections::HashMap;

use super::{MeshError, SurfaceMesh};
use crate::geometry::{LevelSetSurface, Vec3};

struct Bisector<'a> {
    verts: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
    /// local index of the vertex opposite the refinement edge
    ref_edge: Vec<u8>,
    alive: Vec<bool>,
    /// undirected edge -> alive triangles on it
    edge_tris: HashMap<(usize, usize), Vec<usize>>,
    edge_midpoint: HashMap<(usize, usize), usize>,
    surface: Option<&'a LevelSetSurface>,
    splits: usize,
    split_limit: usize,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl<'a> Bisector<'a> {
    fn new(mesh: &SurfaceMesh, surface: Option<&'a LevelSetSurface>) -> Self {
        let tris: Vec<[usize; 3]> = mesh.triangles().to_vec();
        let ref_edge: Vec<u8> = (0..tris.len()).map(|j| mesh.refinement_edge(j)).collect();
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (j, t) in tris.iter().enumerate() {
            for k in 0..3 {
                edge_tris.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(j);
            }
        }
        Bisector {
            verts: mesh.vertices().to_vec(),
            alive: vec![true; tris.len()],
            tris,
            ref_edge,
            edge_tris,
            edge_midpoint: HashMap::new(),
            surface,
            splits: 0,
            split_limit: 10 * mesh.num_triangles(),
        }
    }

    fn refinement_edge_verts(&self, j: usize) -> (usize, usize) {
        let t = self.tris[j];
        let k = self.ref_edge[j] as usize;
        (t[(k + 1) % 3], t[(k + 2) % 3])
    }

    fn neighbor_across(&self, j: usize, e: (usize, usize)) -> Option<usize> {
        self.edge_tris
            .get(&edge_key(e.0, e.1))?
            .iter()
            .copied()
            .find(|&t| t != j && self.alive[t])
    }

    fn midpoint(&mut self, e: (usize, usize)) -> Result<usize, MeshError> {
        let key = edge_key(e.0, e.1);
        if let Some(&m) = self.edge_midpoint.get(&key) {
            return Ok(m);
        }
        let mut m = (self.verts[e.0] + self.verts[e.1]) * 0.5;
        if let Some(s) = self.surface {
            m = s.project_closest_point(m, crate::geometry::PROJECTION_TOL)?;
        }
        self.verts.push(m);
        let id = self.verts.len() - 1;
        self.edge_midpoint.insert(key, id);
        Ok(id)
    }

    /// Split triangle `j` across its refinement edge; `m` is the midpoint.
    /// Children keep `m` as their newest vertex.
    fn split(&mut self, j: usize, m: usize) {
        let t = self.tris[j];
        let k = self.ref_edge[j] as usize;
        let peak = t[k];
        let b = t[(k + 1) % 3];
        let c = t[(k + 2) % 3];
        self.alive[j] = false;
        for &e in &[edge_key(peak, b), edge_key(b, c), edge_key(c, peak)] {
            if let Some(list) = self.edge_tris.get_mut(&e) {
                list.retain(|&x| x != j);
            }
        }
        // children (peak, b, m) and (peak, m, c), both orientation-preserving;
        // refinement edge = the edge opposite the new vertex m
        for (child, new_ref) in [([peak, b, m], 2u8), ([peak, m, c], 1u8)] {
            let id = self.tris.len();
            self.tris.push(child);
            self.ref_edge.push(new_ref);
            self.alive.push(true);
            for k in 0..3 {
                self.edge_tris
                    .entry(edge_key(child[k], child[(k + 1) % 3]))
                    .or_default()
                    .push(id);
            }
        }
        self.splits += 1;
    }

    /// Bisect triangle `j`, recursively making the neighbor across the
    /// refinement edge compatible first.
    fn bisect(&mut self, j0: usize) -> Result<(), MeshError> {
        let mut stack = vec![j0];
        while let Some(&j) = stack.last() {
            if !self.alive[j] {
                stack.pop();
                continue;
            }
            if self.splits > self.split_limit {
                return Err(MeshError::ClosureOverflow(self.split_limit));
            }
            let e = self.refinement_edge_verts(j);
            if let Some(nb) = self.neighbor_across(j, e) {
                let e_nb = self.refinement_edge_verts(nb);
                if edge_key(e_nb.0, e_nb.1) != edge_key(e.0, e.1) {
                    stack.push(nb);
                    continue;
                }
                let m = self.midpoint(e)?;
                self.split(j, m);
                self.split(nb, m);
            } else {
                // closed mesh: this only happens transiently if the neighbor
                // was consumed higher up the stack; re-examine
                let m = self.midpoint(e)?;
                self.split(j, m);
            }
            stack.pop();
        }
        Ok(())
    }

    fn finish(self, generation: u32) -> Result<SurfaceMesh, MeshError> {
        let mut triangles = Vec::new();
        let mut ref_edges = Vec::new();
        for (j, t) in self.tris.iter().enumerate() {
            if self.alive[j] {
                triangles.push(*t);
                ref_edges.push(self.ref_edge[j]);
            }
        }
        SurfaceMesh::assemble(self.verts, triangles, Some(ref_edges), generation)
    }
}

/// Newest-vertex bisection of the marked triangles with conformity closure.
/// New vertices are projected onto the surface when supplied.
/// Deterministic for a given mesh and marked set.
pub fn bisect_marked(
    mesh: &SurfaceMesh,
    marked: &[usize],
    surface: Option<&LevelSetSurface>,
) -> Result<SurfaceMesh, MeshError> {
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let mut b = Bisector::new(mesh, surface);
    let mut order: Vec<usize> = marked.to_vec();
    order.sort_unstable();
    order.dedup();
    for j in order {
        if j >= mesh.num_triangles() {
            return Err(MeshError::IndexOutOfRange { index: j, count: mesh.num_triangles() });
        }
        if b.alive[j] {
            b.bisect(j)?;
        }
    }
    b.finish(mesh.generation() + 1)
}
