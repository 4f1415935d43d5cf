//! Experiment drivers: mesh-sequence convergence studies, adaptive runs,
//! CSV emission, and the invariant self-test suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::estimator::{
    adaptive_solve, dorfler_mark, effectivity_index, estimate, solve_problem, AdaptiveRun,
    ErrorIndicator, EstimatorError,
};
use crate::fem::{error_norms, FemError, ScalarField};
use crate::geometry::{GeometryError, LevelSetSurface, ManufacturedProblem, Vec3};
use crate::mesh::{
    build_mesh, chevron_torus_mesh, export_vtk, projected_icosphere, uniform_refine, FieldData,
    MeshError, SurfaceMesh,
};
use crate::recovery::{
    fit_quadratic_plain, fit_quadratic_value_preserving, metric_corrected_at, recover_tangent_plane,
    select_patch, vertex_normal, LocalFrame, NormalMode, RecoveryError, RecoveryMethod,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("at level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Settings for one experiment run, from a flat key=value config file
/// and/or command-line flags.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: String,
    pub levels: usize,
    pub methods: Vec<RecoveryMethod>,
    pub theta: f64,
    pub max_dof: usize,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "torus_xy".to_string(),
            levels: 5,
            methods: RecoveryMethod::all().to_vec(),
            theta: 0.3,
            max_dof: 50_000,
            out_dir: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Apply `key = value` lines; `#` starts a comment. Unknown keys error.
    pub fn apply_file(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value", i + 1)))?;
            self.apply_key(key.trim(), value.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = |what: &str| HarnessError::Config(format!("bad {what} '{value}'"));
        match key {
            "problem" => self.problem = value.to_string(),
            "levels" => self.levels = value.parse().map_err(|_| bad("levels"))?,
            "recovery" => {
                self.methods = value
                    .split(',')
                    .map(|m| RecoveryMethod::from_name(m.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "theta" => self.theta = value.parse().map_err(|_| bad("theta"))?,
            "max_dof" => self.max_dof = value.parse().map_err(|_| bad("max_dof"))?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.levels == 0 {
            return Err(HarnessError::Config("levels must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("at least one recovery method required".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(HarnessError::Config(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        ManufacturedProblem::by_name(&self.problem)?;
        Ok(())
    }
}

/// Uniform mesh sequence for a problem: direct tensor meshes on the torus,
/// projected icosphere refinements elsewhere.
pub fn mesh_sequence(
    problem: &ManufacturedProblem,
    levels: usize,
) -> Result<Vec<SurfaceMesh>, HarnessError> {
    let surface = problem.surface();
    let mut out = Vec::with_capacity(levels);
    if surface.name() == "torus" {
        for l in 0..levels {
            out.push(chevron_torus_mesh(20 << l, 10 << l)?);
        }
    } else {
        let mut mesh = projected_icosphere(2, surface)?;
        for _ in 0..levels {
            out.push(mesh.clone());
            mesh = uniform_refine(&mesh, Some(surface))?;
        }
    }
    Ok(out)
}

/// Orders in Dof between consecutive levels; the first entry is `None`.
pub fn compute_orders(errors: &[f64], dofs: &[usize]) -> Vec<Option<f64>> {
    let mut orders = vec![None];
    for l in 1..errors.len() {
        let ratio = (dofs[l] as f64 / dofs[l - 1] as f64).ln();
        orders.push(Some((errors[l - 1] / errors[l]).ln() / ratio));
    }
    orders
}

/// Per-method results at one level.
#[derive(Clone, Debug)]
pub struct MethodResult {
    pub method: RecoveryMethod,
    pub de_recovered: f64,
    pub de_max: f64,
    pub eta: f64,
    pub effectivity: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub dof: usize,
    pub h_max: f64,
    pub de: f64,
    pub de_interp: f64,
    pub per_method: Vec<MethodResult>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub methods: Vec<RecoveryMethod>,
    pub levels: Vec<ConvergenceLevel>,
}

impl ConvergenceRecord {
    pub fn dofs(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dof).collect()
    }

    pub fn de_column(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.de).collect()
    }

    pub fn de_interp_column(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.de_interp).collect()
    }

    pub fn method_column(&self, method: RecoveryMethod) -> Vec<f64> {
        self.column_of(method, |m| m.de_recovered)
    }

    pub fn method_max_column(&self, method: RecoveryMethod) -> Vec<f64> {
        self.column_of(method, |m| m.de_max)
    }

    pub fn effectivity_column(&self, method: RecoveryMethod) -> Vec<f64> {
        self.column_of(method, |m| m.effectivity)
    }

    fn column_of(&self, method: RecoveryMethod, f: impl Fn(&MethodResult) -> f64) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| f(l.per_method.iter().find(|m| m.method == method).expect("method present")))
            .collect()
    }

    /// CSV with one row per level: geometry columns, the FE error and the
    /// interpolant error with their orders, then per method the recovered
    /// error, its order, the nodal max error, the estimate, and the
    /// effectivity index. All errors in `%.6e`.
    pub fn to_csv(&self) -> String {
        let mut header = "level,dof,h_max,de,order_de,de_interp,order_de_interp".to_string();
        for m in &self.methods {
            let n = m.name().replace('-', "_");
            let _ = write!(header, ",de_{n},order_{n},demax_{n},eta_{n},kappa_{n}");
        }
        let mut s = header;
        s.push('\n');
        let dofs = self.dofs();
        let order_de = compute_orders(&self.de_column(), &dofs);
        let order_di = compute_orders(&self.de_interp_column(), &dofs);
        let method_orders: Vec<Vec<Option<f64>>> = self
            .methods
            .iter()
            .map(|&m| compute_orders(&self.method_column(m), &dofs))
            .collect();
        let fmt_order = |o: &Option<f64>| match o {
            Some(v) => format!("{v:.2}"),
            None => String::new(),
        };
        for (li, lvl) in self.levels.iter().enumerate() {
            let _ = write!(
                s,
                "{},{},{:.6e},{:.6e},{},{:.6e},{}",
                lvl.level,
                lvl.dof,
                lvl.h_max,
                lvl.de,
                fmt_order(&order_de[li]),
                lvl.de_interp,
                fmt_order(&order_di[li]),
            );
            for (mi, m) in lvl.per_method.iter().enumerate() {
                let _ = write!(
                    s,
                    ",{:.6e},{},{:.6e},{:.6e},{:.6e}",
                    m.de_recovered,
                    fmt_order(&method_orders[mi][li]),
                    m.de_max,
                    m.eta,
                    m.effectivity,
                );
            }
            s.push('\n');
        }
        s
    }
}

/// Solve the configured problem on a uniform mesh sequence and collect all
/// error norms per recovery method; writes `convergence_<problem>.csv`
/// when an output directory is configured.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceRecord, HarnessError> {
    config.validate()?;
    let problem = ManufacturedProblem::by_name(&config.problem)?;
    let meshes = mesh_sequence(&problem, config.levels)?;
    let mut record = ConvergenceRecord {
        problem: config.problem.clone(),
        methods: config.methods.clone(),
        levels: Vec::new(),
    };
    for (level, mesh) in meshes.iter().enumerate() {
        let run = (|| -> Result<ConvergenceLevel, HarnessError> {
            let u = solve_problem(mesh, &problem)?;
            let mut per_method = Vec::new();
            let mut de = 0.0;
            let mut de_interp = 0.0;
            for &method in &config.methods {
                let rec = method.apply(mesh, &u, Some(problem.surface()))?;
                let norms = error_norms(mesh, &problem, &u, Some(&rec))?;
                let ind = estimate(mesh, &u, &rec)?;
                de = norms.de;
                de_interp = norms.de_interp;
                per_method.push(MethodResult {
                    method,
                    de_recovered: norms.de_recovered.unwrap(),
                    de_max: norms.de_max_recovered.unwrap(),
                    eta: ind.global,
                    effectivity: effectivity_index(&ind, norms.de),
                });
            }
            Ok(ConvergenceLevel {
                level,
                dof: mesh.num_vertices(),
                h_max: mesh.h_max(),
                de,
                de_interp,
                per_method,
            })
        })()
        .map_err(|e| HarnessError::Level { level, source: Box::new(e) })?;
        record.levels.push(run);
    }
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("convergence_{}.csv", config.problem)), record.to_csv())?;
    }
    Ok(record)
}

/// History CSV for an adaptive run: timing column last so the rest of the
/// row is deterministic.
pub fn adaptive_history_csv(run: &AdaptiveRun) -> String {
    let mut s = String::from("iteration,dof,eta,de,kappa,marked_count,wall_time_ms\n");
    for step in &run.steps {
        let _ = writeln!(
            s,
            "{},{},{:.6e},{:.6e},{:.6e},{},{:.3}",
            step.iteration, step.dof, step.eta, step.de, step.effectivity, step.marked, step.wall_ms
        );
    }
    s
}

/// Drive the adaptive loop; writes `adaptive_<problem>.csv` and a final
/// VTK mesh with `u_h`, `recovered_gradient`, and per-triangle `eta`.
pub fn run_adaptive(config: &ExperimentConfig) -> Result<AdaptiveRun, HarnessError> {
    config.validate()?;
    let problem = ManufacturedProblem::by_name(&config.problem)?;
    let surface = problem.surface();
    let initial = if surface.name() == "torus" {
        chevron_torus_mesh(20, 10)?
    } else {
        projected_icosphere(2, surface)?
    };
    let run = adaptive_solve(
        &initial,
        &problem,
        *config.methods.first().unwrap(),
        config.theta,
        config.max_dof,
    )?;
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("adaptive_{}.csv", config.problem)), adaptive_history_csv(&run))?;
        export_vtk(
            &run.mesh,
            &[
                ("u_h", FieldData::Scalar(&run.solution.values)),
                ("recovered_gradient", FieldData::Vector(&run.recovered.values)),
            ],
            &[("eta", &run.indicator.per_triangle)],
            &dir.join(format!("adaptive_{}.vtk", config.problem)),
        )?;
    }
    Ok(run)
}

/// Worst distance of any mesh vertex from the zero level set; errs with
/// the offending vertex if the tolerance is exceeded.
pub fn check_mesh_on_surface(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    tol: f64,
) -> Result<f64, (usize, f64)> {
    let mut worst = (0usize, 0.0f64);
    for (i, &v) in mesh.vertices().iter().enumerate() {
        let g = surface.grad_phi(v).norm().max(1e-14);
        let dist = surface.phi(v).abs() / g;
        if dist > worst.1 {
            worst = (i, dist);
        }
    }
    if worst.1 > tol {
        Err(worst)
    } else {
        Ok(worst.1)
    }
}

/// One named invariant check with the measured defect.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed: measured <= tolerance,
        measured,
        tolerance,
        detail: detail.into(),
    }
}

/// Flat closed test surface: a triangulated grid square closed by an apex
/// fan below its boundary, so interior vertices have entirely flat patches.
fn flat_grid_mesh(n: usize) -> SurfaceMesh {
    let mut vertices = Vec::new();
    for iy in 0..=n {
        for ix in 0..=n {
            vertices.push(Vec3::new(ix as f64, iy as f64, 0.0));
        }
    }
    let idx = |iy: usize, ix: usize| iy * (n + 1) + ix;
    let mut triangles = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            triangles.push([idx(iy, ix), idx(iy, ix + 1), idx(iy + 1, ix + 1)]);
            triangles.push([idx(iy, ix), idx(iy + 1, ix + 1), idx(iy + 1, ix)]);
        }
    }
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
    build_mesh(vertices, triangles).expect("flat grid mesh is valid")
}

fn selftest_value_preservation() -> Check {
    let n = 8;
    let mesh = flat_grid_mesh(n);
    let i = (n / 2) * (n + 1) + n / 2;
    let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
    let patch = select_patch(&mesh, i, &frame).expect("patch");
    let data: Vec<f64> =
        patch.members.iter().map(|&v| ((v * 37 + 11) % 101) as f64 / 17.0).collect();
    let fit = fit_quadratic_value_preserving(&patch, &data);
    let defect = (fit.value_at_center() - data[0]).abs();
    check("value-preservation", defect, 1e-14, "pinned fit reproduces the center datum")
}

fn selftest_planar_quadratic() -> Check {
    let n = 8;
    let mesh = flat_grid_mesh(n);
    let i = (n / 2) * (n + 1) + n / 2;
    let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
    let patch = select_patch(&mesh, i, &frame).expect("patch");
    let q = |v: Vec3| 0.7 + 1.3 * v.x - 0.4 * v.y + 0.25 * v.x * v.x - 0.6 * v.x * v.y
        + 0.15 * v.y * v.y;
    let data: Vec<f64> = patch.members.iter().map(|&v| q(mesh.vertex(v))).collect();
    let fit = fit_quadratic_value_preserving(&patch, &data);
    let p = mesh.vertex(i);
    let exact = Vec3::new(1.3 + 0.5 * p.x - 0.6 * p.y, -0.4 - 0.6 * p.x + 0.3 * p.y, 0.0);
    let dp = fit.gradient_at_center();
    let defect = (frame.t1 * dp.x + frame.t2 * dp.y - exact).norm();
    check("planar-quadratic-exactness", defect, 1e-9, "fit differentiates planar quadratics exactly")
}

fn selftest_frame_rotation_invariance() -> Check {
    let mesh = chevron_torus_mesh(20, 10).expect("torus mesh");
    let u = ScalarField {
        values: mesh.vertices().iter().map(|v| v.x * v.y).collect(),
        generation: mesh.generation(),
    };
    let mut worst = 0.0f64;
    for i in [0, 7, 57, 123] {
        let n = vertex_normal(&mesh, i, NormalMode::SimpleAverage, None).expect("normal");
        let frame = LocalFrame::from_normal(n);
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let rotated = LocalFrame {
            t1: frame.t1 * c + frame.t2 * s,
            t2: frame.t2 * c - frame.t1 * s,
            normal: frame.normal,
        };
        let a = metric_corrected_at(&mesh, &u, i, &frame).expect("recovery");
        let b = metric_corrected_at(&mesh, &u, i, &rotated).expect("recovery");
        worst = worst.max((a - b).norm() / (1.0 + a.norm()));
    }
    check(
        "frame-rotation-invariance",
        worst,
        1e-8,
        "recovered gradient independent of the in-plane chart orientation",
    )
}

fn selftest_tangential_fd_oracle() -> Check {
    let problem = ManufacturedProblem::torus_xy();
    let surface = problem.surface();
    // first differences tolerate a small step; second differences need a
    // larger one to stay above roundoff
    let h = 1e-6;
    let h2 = 1e-4;
    let mut worst = 0.0f64;
    for seed in [(0.3f64, 1.1f64), (2.0, 0.4), (4.1, 5.3)] {
        let (uang, vang) = seed;
        let p = Vec3::new(
            (4.0 + vang.cos()) * uang.cos(),
            (4.0 + vang.cos()) * uang.sin(),
            vang.sin(),
        );
        // numeric ambient gradient and Hessian of the exact extension
        let mut grad = Vec3::zeros();
        let mut hess = [[0.0f64; 3]; 3];
        for a in 0..3 {
            let mut e = Vec3::zeros();
            e[a] = h;
            grad[a] = (problem.u_exact(p + e) - problem.u_exact(p - e)) / (2.0 * h);
            let mut e2 = Vec3::zeros();
            e2[a] = h2;
            hess[a][a] = (problem.u_exact(p + e2) - 2.0 * problem.u_exact(p)
                + problem.u_exact(p - e2))
                / (h2 * h2);
            for b in (a + 1)..3 {
                let mut f = Vec3::zeros();
                f[b] = h2;
                hess[a][b] = (problem.u_exact(p + e2 + f) - problem.u_exact(p + e2 - f)
                    - problem.u_exact(p - e2 + f)
                    + problem.u_exact(p - e2 - f))
                    / (4.0 * h2 * h2);
                hess[b][a] = hess[a][b];
            }
        }
        let n = surface.unit_normal(p).expect("normal");
        let tg_fd = grad - n * n.dot(&grad);
        let tg = problem.tangential_gradient(p).expect("tangential gradient");
        worst = worst.max((tg - tg_fd).norm() / (1.0 + tg.norm()));
        // numeric divergence of the unit normal field
        let mut divn = 0.0;
        for a in 0..3 {
            let mut e = Vec3::zeros();
            e[a] = h;
            divn += (surface.unit_normal(p + e).expect("normal")[a]
                - surface.unit_normal(p - e).expect("normal")[a])
                / (2.0 * h);
        }
        let mut ntn = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                ntn += n[a] * hess[a][b] * n[b];
            }
        }
        let lap_fd = hess[0][0] + hess[1][1] + hess[2][2] - ntn - n.dot(&grad) * divn;
        let lap = problem.tangential_laplacian(p).expect("tangential laplacian");
        worst = worst.max((lap - lap_fd).abs() / (1.0 + lap.abs()));
    }
    check(
        "tangential-operator-fd-oracle",
        worst,
        1e-6,
        "closed-form surface gradient and Laplacian match finite differences",
    )
}

fn selftest_local_matrices() -> Check {
    // one flat unit right triangle, via an assembled mesh restricted to it
    let mesh = flat_grid_mesh(2);
    let k = crate::fem::assemble_stiffness(&mesh);
    let m = crate::fem::assemble_mass(&mesh);
    // vertices 0=(0,0), 1=(1,0), 4=(1,1), 3=(0,1) of the unit cell; check
    // known couplings of the square grid: K(0,0) on a full interior vertex
    // of a right-triangulated grid is 4, K across a diagonal edge -1
    let center = 1 * 3 + 1; // interior vertex (1,1) of the 2x2 grid
    let mut defect = (k.entry(center, center) - 4.0).abs();
    defect = defect.max((k.entry(center, center + 1) + 1.0).abs());
    // mass row sum at the interior vertex equals a third of its patch area
    let patch_area: f64 =
        mesh.incident_triangles(center).iter().map(|&j| mesh.triangle_area(j)).sum();
    let row_sum: f64 =
        (0..mesh.num_vertices()).map(|c| m.entry(center, c)).sum();
    defect = defect.max((row_sum - patch_area / 3.0).abs());
    check("local-stiffness-mass-hand-values", defect, 1e-12, "grid stiffness and mass entries")
}

fn selftest_dorfler_oracle() -> Check {
    let ind = ErrorIndicator {
        per_triangle: vec![3.0, 2.0, 1.0, 1.0],
        global: 15.0f64.sqrt(),
        generation: 0,
    };
    let ok = dorfler_mark(&ind, 0.3).map(|m| m == vec![0]).unwrap_or(false)
        && dorfler_mark(&ind, 0.7).map(|m| m == vec![0, 1]).unwrap_or(false)
        && dorfler_mark(&ind, 1.0).map(|m| m == vec![0, 1, 2, 3]).unwrap_or(false);
    check(
        "dorfler-greedy-oracle",
        if ok { 0.0 } else { 1.0 },
        0.0,
        "greedy bulk marking matches the hand-computed sets",
    )
}

fn selftest_flat_recovery_agreement() -> Check {
    let n = 8;
    let mesh = flat_grid_mesh(n);
    let u = ScalarField {
        values: mesh.vertices().iter().map(|v| (0.3 * v.x + 0.9 * v.y).sin()).collect(),
        generation: mesh.generation(),
    };
    let a = crate::recovery::recover_metric_corrected(&mesh, &u).expect("recovery");
    let b = recover_tangent_plane(&mesh, &u, NormalMode::SimpleAverage, None, true)
        .expect("recovery");
    let mut worst = 0.0f64;
    for iy in 2..n.saturating_sub(1) {
        for ix in 2..n - 1 {
            let i = iy * (n + 1) + ix;
            worst = worst.max((a.values[i] - b.values[i]).norm());
        }
    }
    check(
        "flat-mesh-recovery-agreement",
        worst,
        1e-12,
        "metric correction is inactive on flat patches",
    )
}

fn selftest_mesh_on_surface() -> Check {
    let surface = LevelSetSurface::torus();
    let mesh = chevron_torus_mesh(20, 10).expect("torus mesh");
    match check_mesh_on_surface(&mesh, &surface, 1e-10) {
        Ok(worst) => check("mesh-on-surface", worst, 1e-10, "all vertices on the level set"),
        Err((vertex, dist)) => Check {
            name: "mesh-on-surface".into(),
            passed: false,
            measured: dist,
            tolerance: 1e-10,
            detail: format!("vertex {vertex} is off the surface by {dist:.3e}"),
        },
    }
}

fn selftest_csv_determinism() -> Check {
    let config = ExperimentConfig {
        problem: "torus_xy".into(),
        levels: 2,
        methods: vec![RecoveryMethod::SimpleAveraging],
        ..ExperimentConfig::default()
    };
    let run = |_: usize| run_convergence(&config).map(|r| r.to_csv());
    let same = match (run(0), run(1)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    check(
        "csv-determinism",
        if same { 0.0 } else { 1.0 },
        0.0,
        "identical config gives byte-identical CSV",
    )
}

fn selftest_quadratic_fit_plain_vs_pinned() -> Check {
    // both fit variants agree exactly when the data is itself quadratic
    let n = 8;
    let mesh = flat_grid_mesh(n);
    let i = (n / 2) * (n + 1) + n / 2;
    let frame = LocalFrame::from_normal(Vec3::new(0.0, 0.0, 1.0));
    let patch = select_patch(&mesh, i, &frame).expect("patch");
    let q = |v: Vec3| 1.0 - 0.8 * v.x + 0.3 * v.y + 0.1 * v.x * v.x + 0.2 * v.x * v.y;
    let data: Vec<f64> = patch.members.iter().map(|&v| q(mesh.vertex(v))).collect();
    let a = fit_quadratic_value_preserving(&patch, &data).gradient_at_center();
    let b = fit_quadratic_plain(&patch, &data).gradient_at_center();
    check(
        "fit-variant-agreement-on-quadratics",
        (a - b).norm(),
        1e-9,
        "pinned and plain fits coincide on quadratic data",
    )
}

/// Run every invariant check and return the full report.
pub fn run_selftest() -> SelftestReport {
    SelftestReport {
        checks: vec![
            selftest_value_preservation(),
            selftest_planar_quadratic(),
            selftest_frame_rotation_invariance(),
            selftest_tangential_fd_oracle(),
            selftest_local_matrices(),
            selftest_dorfler_oracle(),
            selftest_flat_recovery_agreement(),
            selftest_quadratic_fit_plain_vs_pinned(),
            selftest_mesh_on_surface(),
            selftest_csv_determinism(),
        ],
    }
}

/// Export a mesh file to another format, used by the CLI `export` command.
pub fn export_converted(
    input: &Path,
    format_name: &str,
    output: Option<&Path>,
) -> Result<PathBuf, HarnessError> {
    use crate::mesh::{export_mesh, import_mesh, MeshFormat};
    let in_format = MeshFormat::from_path(input)?;
    let out_format = MeshFormat::from_name(format_name)?;
    let mesh = import_mesh(input, in_format)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => input.with_extension(format_name),
    };
    export_mesh(&mesh, &[], &path, out_format)?;
    Ok(path)
}
