//! C ABI over the surface finite element toolkit.
//!
//! All objects are passed through opaque handles created and destroyed by
//! this library. Every fallible call returns a [`SurfemStatus`]; on failure
//! a thread-local message with details is available from
//! [`surfem_last_error`]. Output buffers are caller-allocated; the `len`
//! arguments give their capacity in elements and are checked.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use surfem::estimator::{estimate, solve_problem};
use surfem::fem::ScalarField;
use surfem::geometry::{LevelSetSurface, ManufacturedProblem};
use surfem::mesh::{chevron_torus_mesh, projected_icosphere, uniform_refine, SurfaceMesh};
use surfem::recovery::RecoveryMethod;

/// Result code of a C API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SurfemStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string or numeric argument was rejected.
    InvalidArgument = 2,
    /// A name argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// Geometry evaluation failed (projection, degenerate gradient, ...).
    GeometryFailure = 4,
    /// Mesh construction or refinement failed.
    MeshFailure = 5,
    /// Assembly or linear solve failed.
    SolveFailure = 6,
    /// Gradient recovery or error estimation failed.
    RecoveryFailure = 7,
    /// An output buffer was too small.
    BufferTooSmall = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SurfemStatus, message: impl std::fmt::Display) -> SurfemStatus {
    let text = format!("{message}");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn surfem_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Version string of the underlying library; statically allocated.
#[no_mangle]
pub extern "C" fn surfem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque handle to an analytic level-set surface.
pub struct SurfemSurface {
    inner: LevelSetSurface,
}

/// Opaque handle to a benchmark problem (surface plus manufactured solution).
pub struct SurfemProblem {
    inner: ManufacturedProblem,
}

/// Opaque handle to a triangulated surface mesh.
pub struct SurfemMesh {
    inner: SurfaceMesh,
}

/// Opaque handle to a per-vertex solution field tied to the mesh it was
/// computed on.
pub struct SurfemSolution {
    inner: ScalarField,
}

unsafe fn name_from(ptr: *const c_char) -> Result<String, SurfemStatus> {
    if ptr.is_null() {
        return Err(fail(SurfemStatus::NullArgument, "name pointer is null"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s.to_owned()),
        Err(e) => Err(fail(SurfemStatus::InvalidUtf8, e)),
    }
}

macro_rules! require {
    ($ptr:expr, $what:literal) => {
        if $ptr.is_null() {
            return fail(SurfemStatus::NullArgument, concat!($what, " pointer is null"));
        }
    };
}

/// Create a surface by name: "torus", "highcurv", "sphere", or "dziuk".
///
/// # Safety
/// `name` must be a null-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_surface_create(
    name: *const c_char,
    out: *mut *mut SurfemSurface,
) -> SurfemStatus {
    require!(out, "out");
    let name = match name_from(name) {
        Ok(n) => n,
        Err(status) => return status,
    };
    match LevelSetSurface::by_name(&name) {
        Ok(surface) => {
            *out = Box::into_raw(Box::new(SurfemSurface { inner: surface }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::InvalidArgument, e),
    }
}

/// Release a surface handle; null is ignored.
///
/// # Safety
/// `surface` must come from `surfem_surface_create` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn surfem_surface_destroy(surface: *mut SurfemSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

/// Create a benchmark problem by name: "torus_xy", "torus_product",
/// "highcurv_x1x2", "sphere_singular", or "dziuk_peak".
///
/// # Safety
/// `name` must be a null-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_problem_create(
    name: *const c_char,
    out: *mut *mut SurfemProblem,
) -> SurfemStatus {
    require!(out, "out");
    let name = match name_from(name) {
        Ok(n) => n,
        Err(status) => return status,
    };
    match ManufacturedProblem::by_name(&name) {
        Ok(problem) => {
            *out = Box::into_raw(Box::new(SurfemProblem { inner: problem }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::InvalidArgument, e),
    }
}

/// Surface of an existing problem, as a new independent handle.
///
/// # Safety
/// `problem` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_problem_surface(
    problem: *const SurfemProblem,
    out: *mut *mut SurfemSurface,
) -> SurfemStatus {
    require!(problem, "problem");
    require!(out, "out");
    let surface = (*problem).inner.surface().clone();
    *out = Box::into_raw(Box::new(SurfemSurface { inner: surface }));
    SurfemStatus::Ok
}

/// Release a problem handle; null is ignored.
///
/// # Safety
/// `problem` must come from `surfem_problem_create` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn surfem_problem_destroy(problem: *mut SurfemProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Chevron-patterned structured grid on the torus with `n_u` x `n_v` cells
/// (both even, at least 4).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_create_torus_grid(
    n_u: usize,
    n_v: usize,
    out: *mut *mut SurfemMesh,
) -> SurfemStatus {
    require!(out, "out");
    match chevron_torus_mesh(n_u, n_v) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(SurfemMesh { inner: mesh }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::MeshFailure, e),
    }
}

/// Subdivided icosahedron ray-cast onto a surface that is star-shaped with
/// respect to the origin.
///
/// # Safety
/// `surface` must be a live surface handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_create_icosphere(
    level: usize,
    surface: *const SurfemSurface,
    out: *mut *mut SurfemMesh,
) -> SurfemStatus {
    require!(surface, "surface");
    require!(out, "out");
    match projected_icosphere(level, &(*surface).inner) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(SurfemMesh { inner: mesh }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::MeshFailure, e),
    }
}

/// Uniform red refinement. When `surface` is non-null the new vertices are
/// projected onto it.
///
/// # Safety
/// `mesh` must be a live mesh handle, `surface` null or a live surface
/// handle, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_refine(
    mesh: *const SurfemMesh,
    surface: *const SurfemSurface,
    out: *mut *mut SurfemMesh,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(out, "out");
    let surface = if surface.is_null() { None } else { Some(&(*surface).inner) };
    match uniform_refine(&(*mesh).inner, surface) {
        Ok(refined) => {
            *out = Box::into_raw(Box::new(SurfemMesh { inner: refined }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::MeshFailure, e),
    }
}

/// Number of mesh vertices.
///
/// # Safety
/// `mesh` must be a live mesh handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_num_vertices(
    mesh: *const SurfemMesh,
    out: *mut usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(out, "out");
    *out = (*mesh).inner.num_vertices();
    SurfemStatus::Ok
}

/// Number of mesh triangles.
///
/// # Safety
/// `mesh` must be a live mesh handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_num_triangles(
    mesh: *const SurfemMesh,
    out: *mut usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(out, "out");
    *out = (*mesh).inner.num_triangles();
    SurfemStatus::Ok
}

/// Copy vertex coordinates as x0,y0,z0,x1,... into a caller buffer of
/// capacity `len` doubles (needs 3 * num_vertices).
///
/// # Safety
/// `mesh` must be a live mesh handle and `buffer` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_copy_vertices(
    mesh: *const SurfemMesh,
    buffer: *mut f64,
    len: usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(buffer, "buffer");
    let vertices = (*mesh).inner.vertices();
    let needed = 3 * vertices.len();
    if len < needed {
        return fail(
            SurfemStatus::BufferTooSmall,
            format!("vertex buffer holds {len} doubles, {needed} needed"),
        );
    }
    let out = std::slice::from_raw_parts_mut(buffer, needed);
    for (i, v) in vertices.iter().enumerate() {
        out[3 * i] = v.x;
        out[3 * i + 1] = v.y;
        out[3 * i + 2] = v.z;
    }
    SurfemStatus::Ok
}

/// Copy triangle vertex indices as i0,j0,k0,i1,... into a caller buffer of
/// capacity `len` entries (needs 3 * num_triangles).
///
/// # Safety
/// `mesh` must be a live mesh handle and `buffer` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_copy_triangles(
    mesh: *const SurfemMesh,
    buffer: *mut u64,
    len: usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(buffer, "buffer");
    let triangles = (*mesh).inner.triangles();
    let needed = 3 * triangles.len();
    if len < needed {
        return fail(
            SurfemStatus::BufferTooSmall,
            format!("triangle buffer holds {len} entries, {needed} needed"),
        );
    }
    let out = std::slice::from_raw_parts_mut(buffer, needed);
    for (j, t) in triangles.iter().enumerate() {
        out[3 * j] = t[0] as u64;
        out[3 * j + 1] = t[1] as u64;
        out[3 * j + 2] = t[2] as u64;
    }
    SurfemStatus::Ok
}

/// Release a mesh handle; null is ignored.
///
/// # Safety
/// `mesh` must come from a mesh constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn surfem_mesh_destroy(mesh: *mut SurfemMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Solve the problem's linear finite element system on the mesh.
///
/// # Safety
/// `problem` and `mesh` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_solve(
    problem: *const SurfemProblem,
    mesh: *const SurfemMesh,
    out: *mut *mut SurfemSolution,
) -> SurfemStatus {
    require!(problem, "problem");
    require!(mesh, "mesh");
    require!(out, "out");
    match solve_problem(&(*mesh).inner, &(*problem).inner) {
        Ok(u_h) => {
            *out = Box::into_raw(Box::new(SurfemSolution { inner: u_h }));
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::SolveFailure, e),
    }
}

/// Number of per-vertex values in the solution.
///
/// # Safety
/// `solution` must be a live solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surfem_solution_len(
    solution: *const SurfemSolution,
    out: *mut usize,
) -> SurfemStatus {
    require!(solution, "solution");
    require!(out, "out");
    *out = (*solution).inner.values.len();
    SurfemStatus::Ok
}

/// Copy the per-vertex solution values into a caller buffer of capacity
/// `len` doubles (needs num_vertices).
///
/// # Safety
/// `solution` must be a live solution handle and `buffer` valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn surfem_solution_copy_values(
    solution: *const SurfemSolution,
    buffer: *mut f64,
    len: usize,
) -> SurfemStatus {
    require!(solution, "solution");
    require!(buffer, "buffer");
    let values = &(*solution).inner.values;
    if len < values.len() {
        return fail(
            SurfemStatus::BufferTooSmall,
            format!("solution buffer holds {len} doubles, {} needed", values.len()),
        );
    }
    std::slice::from_raw_parts_mut(buffer, values.len()).copy_from_slice(values);
    SurfemStatus::Ok
}

/// Release a solution handle; null is ignored.
///
/// # Safety
/// `solution` must come from `surfem_solve` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn surfem_solution_destroy(solution: *mut SurfemSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Recover a per-vertex gradient field with the named method ("pppr",
/// "ppr-exact", "ppr-avg", "sa", or "wa"). The "ppr-exact" method needs a
/// non-null surface for its exact normals; the others accept null. Writes
/// gx0,gy0,gz0,gx1,... into a caller buffer of capacity `len` doubles
/// (needs 3 * num_vertices).
///
/// # Safety
/// Handles must be live, `method` null-terminated, and `buffer` valid for
/// `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surfem_recover_gradient(
    mesh: *const SurfemMesh,
    solution: *const SurfemSolution,
    method: *const c_char,
    surface: *const SurfemSurface,
    buffer: *mut f64,
    len: usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(solution, "solution");
    require!(buffer, "buffer");
    let method = match name_from(method) {
        Ok(m) => m,
        Err(status) => return status,
    };
    let method = match RecoveryMethod::from_name(&method) {
        Ok(m) => m,
        Err(e) => return fail(SurfemStatus::InvalidArgument, e),
    };
    let surface = if surface.is_null() { None } else { Some(&(*surface).inner) };
    let mesh = &(*mesh).inner;
    let needed = 3 * mesh.num_vertices();
    if len < needed {
        return fail(
            SurfemStatus::BufferTooSmall,
            format!("gradient buffer holds {len} doubles, {needed} needed"),
        );
    }
    match method.apply(mesh, &(*solution).inner, surface) {
        Ok(field) => {
            let out = std::slice::from_raw_parts_mut(buffer, needed);
            for (i, g) in field.values.iter().enumerate() {
                out[3 * i] = g.x;
                out[3 * i + 1] = g.y;
                out[3 * i + 2] = g.z;
            }
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::RecoveryFailure, e),
    }
}

/// Recovery-based a posteriori error estimate. Writes the global estimate
/// to `eta_total`; when `per_triangle` is non-null it receives the local
/// indicators (capacity `len` doubles, needs num_triangles).
///
/// # Safety
/// Handles must be live, `method` null-terminated, `eta_total` valid, and
/// `per_triangle` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surfem_estimate_error(
    mesh: *const SurfemMesh,
    solution: *const SurfemSolution,
    method: *const c_char,
    surface: *const SurfemSurface,
    eta_total: *mut f64,
    per_triangle: *mut f64,
    len: usize,
) -> SurfemStatus {
    require!(mesh, "mesh");
    require!(solution, "solution");
    require!(eta_total, "eta_total");
    let method_name = match name_from(method) {
        Ok(m) => m,
        Err(status) => return status,
    };
    let method = match RecoveryMethod::from_name(&method_name) {
        Ok(m) => m,
        Err(e) => return fail(SurfemStatus::InvalidArgument, e),
    };
    let surface = if surface.is_null() { None } else { Some(&(*surface).inner) };
    let mesh = &(*mesh).inner;
    let recovered = match method.apply(mesh, &(*solution).inner, surface) {
        Ok(field) => field,
        Err(e) => return fail(SurfemStatus::RecoveryFailure, e),
    };
    match estimate(mesh, &(*solution).inner, &recovered) {
        Ok(indicator) => {
            *eta_total = indicator.global;
            if !per_triangle.is_null() {
                let needed = indicator.per_triangle.len();
                if len < needed {
                    return fail(
                        SurfemStatus::BufferTooSmall,
                        format!("indicator buffer holds {len} doubles, {needed} needed"),
                    );
                }
                std::slice::from_raw_parts_mut(per_triangle, needed)
                    .copy_from_slice(&indicator.per_triangle);
            }
            SurfemStatus::Ok
        }
        Err(e) => fail(SurfemStatus::RecoveryFailure, e),
    }
}
