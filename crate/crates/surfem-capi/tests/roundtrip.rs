use std::ffi::{CStr, CString};
use std::ptr;

use surfem_capi::*;

fn c(name: &str) -> CString {
    CString::new(name).unwrap()
}

#[test]
fn full_pipeline_through_the_c_interface() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(surfem_problem_create(c("torus_xy").as_ptr(), &mut problem), SurfemStatus::Ok);

        let mut surface = ptr::null_mut();
        assert_eq!(surfem_problem_surface(problem, &mut surface), SurfemStatus::Ok);

        let mut mesh = ptr::null_mut();
        assert_eq!(surfem_mesh_create_torus_grid(20, 10, &mut mesh), SurfemStatus::Ok);
        let mut refined = ptr::null_mut();
        assert_eq!(surfem_mesh_refine(mesh, surface, &mut refined), SurfemStatus::Ok);

        let (mut nv, mut nf) = (0usize, 0usize);
        assert_eq!(surfem_mesh_num_vertices(refined, &mut nv), SurfemStatus::Ok);
        assert_eq!(surfem_mesh_num_triangles(refined, &mut nf), SurfemStatus::Ok);
        assert_eq!(nv, 800);
        assert_eq!(nf, 1600);

        let mut coords = vec![0.0f64; 3 * nv];
        assert_eq!(
            surfem_mesh_copy_vertices(refined, coords.as_mut_ptr(), coords.len()),
            SurfemStatus::Ok
        );
        assert!(coords.iter().all(|x| x.is_finite()));
        let mut tris = vec![0u64; 3 * nf];
        assert_eq!(
            surfem_mesh_copy_triangles(refined, tris.as_mut_ptr(), tris.len()),
            SurfemStatus::Ok
        );
        assert!(tris.iter().all(|&i| (i as usize) < nv));

        let mut solution = ptr::null_mut();
        assert_eq!(surfem_solve(problem, refined, &mut solution), SurfemStatus::Ok);
        let mut n = 0usize;
        assert_eq!(surfem_solution_len(solution, &mut n), SurfemStatus::Ok);
        assert_eq!(n, nv);
        let mut values = vec![0.0f64; n];
        assert_eq!(
            surfem_solution_copy_values(solution, values.as_mut_ptr(), values.len()),
            SurfemStatus::Ok
        );
        assert!(values.iter().all(|v| v.is_finite()));
        assert!(values.iter().any(|&v| v.abs() > 0.1));

        let mut gradient = vec![0.0f64; 3 * nv];
        assert_eq!(
            surfem_recover_gradient(
                refined,
                solution,
                c("pppr").as_ptr(),
                surface,
                gradient.as_mut_ptr(),
                gradient.len(),
            ),
            SurfemStatus::Ok
        );
        assert!(gradient.iter().all(|g| g.is_finite()));
        assert!(gradient.iter().any(|&g| g.abs() > 0.1));

        let mut eta = 0.0f64;
        let mut local = vec![0.0f64; nf];
        assert_eq!(
            surfem_estimate_error(
                refined,
                solution,
                c("pppr").as_ptr(),
                surface,
                &mut eta,
                local.as_mut_ptr(),
                local.len(),
            ),
            SurfemStatus::Ok
        );
        assert!(eta > 0.0);
        let sum_sq: f64 = local.iter().map(|e| e * e).sum();
        assert!((sum_sq.sqrt() - eta).abs() < 1e-12 * eta.max(1.0));

        surfem_solution_destroy(solution);
        surfem_mesh_destroy(refined);
        surfem_mesh_destroy(mesh);
        surfem_surface_destroy(surface);
        surfem_problem_destroy(problem);
    }
}

#[test]
fn failures_set_status_and_message() {
    unsafe {
        let mut surface = ptr::null_mut();
        assert_eq!(
            surfem_surface_create(c("klein_bottle").as_ptr(), &mut surface),
            SurfemStatus::InvalidArgument
        );
        let message = CStr::from_ptr(surfem_last_error()).to_string_lossy().into_owned();
        assert!(message.contains("klein_bottle"), "message was: {message}");

        assert_eq!(
            surfem_surface_create(ptr::null(), &mut surface),
            SurfemStatus::NullArgument
        );
        let mut mesh = ptr::null_mut();
        assert_eq!(
            surfem_mesh_create_torus_grid(3, 10, &mut mesh),
            SurfemStatus::MeshFailure
        );

        // a valid mesh with an undersized vertex buffer
        assert_eq!(surfem_mesh_create_torus_grid(4, 4, &mut mesh), SurfemStatus::Ok);
        let mut tiny = [0.0f64; 3];
        assert_eq!(
            surfem_mesh_copy_vertices(mesh, tiny.as_mut_ptr(), tiny.len()),
            SurfemStatus::BufferTooSmall
        );
        surfem_mesh_destroy(mesh);
    }
}

#[test]
fn version_and_header_exist() {
    unsafe {
        let version = CStr::from_ptr(surfem_version()).to_str().unwrap();
        assert!(!version.is_empty());
    }
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/surfem.h");
    let text = std::fs::read_to_string(header).expect("generated C header present");
    for symbol in [
        "surfem_surface_create",
        "surfem_solve",
        "surfem_recover_gradient",
        "surfem_estimate_error",
        "SURFEM_STATUS_OK",
    ] {
        assert!(text.contains(symbol), "header misses {symbol}");
    }
}
