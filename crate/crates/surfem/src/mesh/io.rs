//! ASCII mesh I/O: OFF and OBJ import/export, VTK legacy export with named
//! per-vertex point-data fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{build_mesh, MeshError, SurfaceMesh};
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    VtkLegacy,
}

impl MeshFormat {
    pub fn from_name(name: &str) -> Result<Self, MeshError> {
        match name.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "vtk" => Ok(MeshFormat::VtkLegacy),
            other => Err(MeshError::UnknownFormat(other.to_string())),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| MeshError::UnknownFormat(path.display().to_string()))?;
        Self::from_name(ext)
    }
}

/// Per-vertex data attached to a VTK export.
pub enum FieldData<'a> {
    Scalar(&'a [f64]),
    Vector(&'a [Vec3]),
}

pub fn import_mesh(path: &Path, format: MeshFormat) -> Result<SurfaceMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::VtkLegacy => Err(MeshError::UnknownFormat("vtk import not supported".into())),
    }
}

pub fn export_mesh(
    mesh: &SurfaceMesh,
    fields: &[(&str, FieldData)],
    path: &Path,
    format: MeshFormat,
) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Off => write_off(mesh),
        MeshFormat::Obj => write_obj(mesh),
        MeshFormat::VtkLegacy => write_vtk(mesh, fields, &[]),
    };
    fs::write(path, text)?;
    Ok(())
}

/// VTK export with both per-vertex fields and per-triangle scalars.
pub fn export_vtk(
    mesh: &SurfaceMesh,
    fields: &[(&str, FieldData)],
    cell_scalars: &[(&str, &[f64])],
    path: &Path,
) -> Result<(), MeshError> {
    fs::write(path, write_vtk(mesh, fields, cell_scalars))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn parse_off(text: &str) -> Result<SurfaceMesh, MeshError> {
    // meaningful lines with original line numbers, comments stripped
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty OFF file"))?;
    if header != "OFF" {
        return Err(parse_err(ln, format!("expected OFF header, found '{header}'")));
    }
    let (ln, counts) = lines.next().ok_or_else(|| parse_err(ln, "missing count line"))?;
    let nums: Vec<usize> = counts
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad count '{w}'"))))
        .collect::<Result<_, _>>()?;
    if nums.len() != 3 {
        return Err(parse_err(ln, "count line must have 3 entries"));
    }
    let (nv, nf) = (nums[0], nums[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertices"))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad coordinate '{w}'"))))
            .collect::<Result<_, _>>()?;
        if c.len() != 3 {
            return Err(parse_err(ln, format!("expected 3 coordinates, found {}", c.len())));
        }
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of faces"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad index '{w}'"))))
            .collect::<Result<_, _>>()?;
        if idx.is_empty() || idx[0] != idx.len() - 1 {
            return Err(parse_err(ln, "face arity does not match vertex count"));
        }
        if idx[0] != 3 {
            return Err(parse_err(ln, format!("only triangle faces supported, found arity {}", idx[0])));
        }
        triangles.push([idx[1], idx[2], idx[3]]);
    }
    build_mesh(vertices, triangles)
}

fn parse_obj(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .map(|w| w.parse().map_err(|_| parse_err(ln, format!("bad coordinate '{w}'"))))
                    .collect::<Result<_, _>>()?;
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|w| {
                        let first = w.split('/').next().unwrap_or(w);
                        first
                            .parse::<usize>()
                            .map_err(|_| parse_err(ln, format!("bad face index '{w}'")))
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(parse_err(ln, format!("only triangle faces supported, found arity {}", idx.len())));
                }
                if idx.iter().any(|&v| v == 0) {
                    return Err(parse_err(ln, "OBJ indices are 1-based"));
                }
                triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            // ignore normals, texcoords, groups, materials
            _ => {}
        }
    }
    build_mesh(vertices, triangles)
}

fn write_off(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_triangles(), mesh.num_edges());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.17} {:.17} {:.17}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn write_obj(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:.17} {:.17} {:.17}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

fn write_vtk(
    mesh: &SurfaceMesh,
    fields: &[(&str, FieldData)],
    cell_scalars: &[(&str, &[f64])],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "surfem mesh");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET POLYDATA");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.17} {:.17} {:.17}", v.x, v.y, v.z);
    }
    let nf = mesh.num_triangles();
    let _ = writeln!(s, "POLYGONS {} {}", nf, 4 * nf);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
        for (name, data) in fields {
            match data {
                FieldData::Scalar(values) => {
                    let _ = writeln!(s, "SCALARS {name} double 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for v in *values {
                        let _ = writeln!(s, "{v:.17}");
                    }
                }
                FieldData::Vector(values) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for v in *values {
                        let _ = writeln!(s, "{:.17} {:.17} {:.17}", v.x, v.y, v.z);
                    }
                }
            }
        }
    }
    if !cell_scalars.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", mesh.num_triangles());
        for (name, values) in cell_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.17}");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> SurfaceMesh {
        let vertices = vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ];
        let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        build_mesh(vertices, triangles).unwrap()
    }

    #[test]
    fn off_roundtrip_preserves_everything() {
        let mesh = tetra();
        let text = write_off(&mesh);
        let back = parse_off(&text).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!((a - b).norm() < 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn obj_roundtrip_preserves_connectivity() {
        let mesh = tetra();
        let text = write_obj(&mesh);
        let back = parse_obj(&text).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
    }

    #[test]
    fn off_quad_face_is_rejected_with_arity() {
        let text = "OFF\n4 1 4\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let err = parse_off(text).unwrap_err();
        match err {
            MeshError::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("arity 4"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn vtk_contains_vector_block() {
        let mesh = tetra();
        let grads: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let u: Vec<f64> = (0..4).map(|i| i as f64).collect();
        let eta: Vec<f64> = (0..4).map(|j| j as f64 * 0.1).collect();
        let text = write_vtk(
            &mesh,
            &[("u_h", FieldData::Scalar(&u)), ("recovered_gradient", FieldData::Vector(&grads))],
            &[("eta", &eta)],
        );
        assert!(text.contains("VECTORS recovered_gradient double"));
        assert!(text.contains("SCALARS u_h double 1"));
        assert!(text.contains("POINT_DATA 4"));
        assert!(text.contains("CELL_DATA 4"));
        assert!(text.contains("SCALARS eta double 1"));
    }

    #[test]
    fn format_lookup() {
        assert_eq!(MeshFormat::from_name("off").unwrap(), MeshFormat::Off);
        assert_eq!(MeshFormat::from_name("VTK").unwrap(), MeshFormat::VtkLegacy);
        assert!(MeshFormat::from_name("ply").is_err());
        assert_eq!(MeshFormat::from_path(Path::new("m.obj")).unwrap(), MeshFormat::Obj);
    }
}
