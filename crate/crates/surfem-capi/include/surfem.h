#ifndef SURFEM_CAPI_H
#define SURFEM_CAPI_H

/* Generated by cbindgen from the surfem-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of a C API call.
 */
typedef enum SurfemStatus {
  SURFEM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SURFEM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string or numeric argument was rejected.
   */
  SURFEM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A name argument was not valid UTF-8.
   */
  SURFEM_STATUS_INVALID_UTF8 = 3,
  /**
   * Geometry evaluation failed (projection, degenerate gradient, ...).
   */
  SURFEM_STATUS_GEOMETRY_FAILURE = 4,
  /**
   * Mesh construction or refinement failed.
   */
  SURFEM_STATUS_MESH_FAILURE = 5,
  /**
   * Assembly or linear solve failed.
   */
  SURFEM_STATUS_SOLVE_FAILURE = 6,
  /**
   * Gradient recovery or error estimation failed.
   */
  SURFEM_STATUS_RECOVERY_FAILURE = 7,
  /**
   * An output buffer was too small.
   */
  SURFEM_STATUS_BUFFER_TOO_SMALL = 8,
} SurfemStatus;

/**
 * Opaque handle to a triangulated surface mesh.
 */
typedef struct SurfemMesh SurfemMesh;

/**
 * Opaque handle to a benchmark problem (surface plus manufactured solution).
 */
typedef struct SurfemProblem SurfemProblem;

/**
 * Opaque handle to a per-vertex solution field tied to the mesh it was
 * computed on.
 */
typedef struct SurfemSolution SurfemSolution;

/**
 * Opaque handle to an analytic level-set surface.
 */
typedef struct SurfemSurface SurfemSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *surfem_last_error(void);

/**
 * Version string of the underlying library; statically allocated.
 */
const char *surfem_version(void);

/**
 * Create a surface by name: "torus", "highcurv", "sphere", or "dziuk".
 *
 * # Safety
 * `name` must be a null-terminated string and `out` a valid pointer.
 */
enum SurfemStatus surfem_surface_create(const char *name, struct SurfemSurface **out);

/**
 * Release a surface handle; null is ignored.
 *
 * # Safety
 * `surface` must come from `surfem_surface_create` and not be used again.
 */
void surfem_surface_destroy(struct SurfemSurface *surface);

/**
 * Create a benchmark problem by name: "torus_xy", "torus_product",
 * "highcurv_x1x2", "sphere_singular", or "dziuk_peak".
 *
 * # Safety
 * `name` must be a null-terminated string and `out` a valid pointer.
 */
enum SurfemStatus surfem_problem_create(const char *name, struct SurfemProblem **out);

/**
 * Surface of an existing problem, as a new independent handle.
 *
 * # Safety
 * `problem` must be a live problem handle and `out` a valid pointer.
 */
enum SurfemStatus surfem_problem_surface(const struct SurfemProblem *problem,
                                         struct SurfemSurface **out);

/**
 * Release a problem handle; null is ignored.
 *
 * # Safety
 * `problem` must come from `surfem_problem_create` and not be used again.
 */
void surfem_problem_destroy(struct SurfemProblem *problem);

/**
 * Chevron-patterned structured grid on the torus with `n_u` x `n_v` cells
 * (both even, at least 4).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SurfemStatus surfem_mesh_create_torus_grid(uintptr_t n_u,
                                                uintptr_t n_v,
                                                struct SurfemMesh **out);

/**
 * Subdivided icosahedron ray-cast onto a surface that is star-shaped with
 * respect to the origin.
 *
 * # Safety
 * `surface` must be a live surface handle and `out` a valid pointer.
 */
enum SurfemStatus surfem_mesh_create_icosphere(uintptr_t level,
                                               const struct SurfemSurface *surface,
                                               struct SurfemMesh **out);

/**
 * Uniform red refinement. When `surface` is non-null the new vertices are
 * projected onto it.
 *
 * # Safety
 * `mesh` must be a live mesh handle, `surface` null or a live surface
 * handle, and `out` a valid pointer.
 */
enum SurfemStatus surfem_mesh_refine(const struct SurfemMesh *mesh,
                                     const struct SurfemSurface *surface,
                                     struct SurfemMesh **out);

/**
 * Number of mesh vertices.
 *
 * # Safety
 * `mesh` must be a live mesh handle and `out` a valid pointer.
 */
enum SurfemStatus surfem_mesh_num_vertices(const struct SurfemMesh *mesh, uintptr_t *out);

/**
 * Number of mesh triangles.
 *
 * # Safety
 * `mesh` must be a live mesh handle and `out` a valid pointer.
 */
enum SurfemStatus surfem_mesh_num_triangles(const struct SurfemMesh *mesh, uintptr_t *out);

/**
 * Copy vertex coordinates as x0,y0,z0,x1,... into a caller buffer of
 * capacity `len` doubles (needs 3 * num_vertices).
 *
 * # Safety
 * `mesh` must be a live mesh handle and `buffer` valid for `len` writes.
 */
enum SurfemStatus surfem_mesh_copy_vertices(const struct SurfemMesh *mesh,
                                            double *buffer,
                                            uintptr_t len);

/**
 * Copy triangle vertex indices as i0,j0,k0,i1,... into a caller buffer of
 * capacity `len` entries (needs 3 * num_triangles).
 *
 * # Safety
 * `mesh` must be a live mesh handle and `buffer` valid for `len` writes.
 */
enum SurfemStatus surfem_mesh_copy_triangles(const struct SurfemMesh *mesh,
                                             uint64_t *buffer,
                                             uintptr_t len);

/**
 * Release a mesh handle; null is ignored.
 *
 * # Safety
 * `mesh` must come from a mesh constructor and not be used again.
 */
void surfem_mesh_destroy(struct SurfemMesh *mesh);

/**
 * Solve the problem's linear finite element system on the mesh.
 *
 * # Safety
 * `problem` and `mesh` must be live handles and `out` a valid pointer.
 */
enum SurfemStatus surfem_solve(const struct SurfemProblem *problem,
                               const struct SurfemMesh *mesh,
                               struct SurfemSolution **out);

/**
 * Number of per-vertex values in the solution.
 *
 * # Safety
 * `solution` must be a live solution handle and `out` a valid pointer.
 */
enum SurfemStatus surfem_solution_len(const struct SurfemSolution *solution, uintptr_t *out);

/**
 * Copy the per-vertex solution values into a caller buffer of capacity
 * `len` doubles (needs num_vertices).
 *
 * # Safety
 * `solution` must be a live solution handle and `buffer` valid for `len`
 * writes.
 */
enum SurfemStatus surfem_solution_copy_values(const struct SurfemSolution *solution,
                                              double *buffer,
                                              uintptr_t len);

/**
 * Release a solution handle; null is ignored.
 *
 * # Safety
 * `solution` must come from `surfem_solve` and not be used again.
 */
void surfem_solution_destroy(struct SurfemSolution *solution);

/**
 * Recover a per-vertex gradient field with the named method ("pppr",
 * "ppr-exact", "ppr-avg", "sa", or "wa"). The "ppr-exact" method needs a
 * non-null surface for its exact normals; the others accept null. Writes
 * gx0,gy0,gz0,gx1,... into a caller buffer of capacity `len` doubles
 * (needs 3 * num_vertices).
 *
 * # Safety
 * Handles must be live, `method` null-terminated, and `buffer` valid for
 * `len` writes.
 */
enum SurfemStatus surfem_recover_gradient(const struct SurfemMesh *mesh,
                                          const struct SurfemSolution *solution,
                                          const char *method,
                                          const struct SurfemSurface *surface,
                                          double *buffer,
                                          uintptr_t len);

/**
 * Recovery-based a posteriori error estimate. Writes the global estimate
 * to `eta_total`; when `per_triangle` is non-null it receives the local
 * indicators (capacity `len` doubles, needs num_triangles).
 *
 * # Safety
 * Handles must be live, `method` null-terminated, `eta_total` valid, and
 * `per_triangle` null or valid for `len` writes.
 */
enum SurfemStatus surfem_estimate_error(const struct SurfemMesh *mesh,
                                        const struct SurfemSolution *solution,
                                        const char *method,
                                        const struct SurfemSurface *surface,
                                        double *eta_total,
                                        double *per_triangle,
                                        uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFEM_CAPI_H */
