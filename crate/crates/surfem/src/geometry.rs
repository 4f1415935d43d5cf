//! Analytic level-set surfaces, exact tangential calculus and projection maps.
//!
//! Each benchmark surface is a zero level set `{phi = 0}` with hand-coded
//! closed-form gradient and Hessian of `phi`, so exact normals, curvature
//! terms and manufactured right-hand sides carry no differentiation error.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Gradient magnitude below this is treated as degenerate.
pub const DEGENERATE_GRADIENT_TOL: f64 = 1e-12;

/// Default tolerance for the closest-point iteration.
pub const PROJECTION_TOL: f64 = 1e-12;

const MAX_PROJECTION_ITERS: usize = 50;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate level-set gradient at ({0:.6}, {1:.6}, {2:.6})")]
    DegenerateGradient(f64, f64, f64),
    #[error("point ({x:.6}, {y:.6}, {z:.6}) outside tube neighborhood of '{surface}' (estimated distance {dist:.3e}, tube {tube:.3e})")]
    OutsideTube {
        surface: &'static str,
        x: f64,
        y: f64,
        z: f64,
        dist: f64,
        tube: f64,
    },
    #[error("closest-point projection stalled: |phi| = {residual:.3e} after {iters} iterations")]
    ProjectionStalled { residual: f64, iters: usize },
    #[error("point is not on the surface: |phi| = {0:.3e}")]
    NotOnSurface(f64),
    #[error("unknown surface '{0}' (known: torus, highcurv, sphere, dziuk)")]
    UnknownSurface(String),
    #[error("unknown problem '{0}' (known: torus_xy, highcurv_x1x2, sphere_singular, dziuk_peak)")]
    UnknownProblem(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SurfaceKind {
    /// Signed distance of the torus with major radius 4 and minor radius 1.
    Torus,
    /// High-curvature closed surface: x1^2/4 + x2^2 + 4 x3^2 / (1 + sin(pi x1)/2)^2 = 1.
    HighCurv,
    /// Unit sphere, phi = |x| - 1.
    Sphere,
    /// Dziuk surface: (x1 - x3^2)^2 + x2^2 + x3^2 = 1.
    Dziuk,
}

/// An analytic closed surface `{phi = 0}` with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelSetSurface {
    kind: SurfaceKind,
}

impl LevelSetSurface {
    pub fn torus() -> Self {
        Self { kind: SurfaceKind::Torus }
    }

    pub fn high_curvature() -> Self {
        Self { kind: SurfaceKind::HighCurv }
    }

    pub fn unit_sphere() -> Self {
        Self { kind: SurfaceKind::Sphere }
    }

    pub fn dziuk() -> Self {
        Self { kind: SurfaceKind::Dziuk }
    }

    pub fn by_name(name: &str) -> Result<Self, GeometryError> {
        match name {
            "torus" => Ok(Self::torus()),
            "highcurv" => Ok(Self::high_curvature()),
            "sphere" => Ok(Self::unit_sphere()),
            "dziuk" => Ok(Self::dziuk()),
            other => Err(GeometryError::UnknownSurface(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SurfaceKind::Torus => "torus",
            SurfaceKind::HighCurv => "highcurv",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Dziuk => "dziuk",
        }
    }

    /// Axis-aligned box containing the surface.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match self.kind {
            SurfaceKind::Torus => (Vec3::new(-5.0, -5.0, -1.0), Vec3::new(5.0, 5.0, 1.0)),
            SurfaceKind::HighCurv => (Vec3::new(-2.0, -1.0, -0.8), Vec3::new(2.0, 1.0, 0.8)),
            SurfaceKind::Sphere => (Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)),
            SurfaceKind::Dziuk => (Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.3, 1.0, 1.0)),
        }
    }

    /// Maximum estimated distance at which projections are still attempted.
    ///
    /// Half the minimum feature radius, widened where the projection is
    /// well behaved beyond that: the sphere's closest-point map is defined
    /// everywhere away from the center, and the elongated high-curvature
    /// surface needs room for coarse-mesh chord midpoints.
    pub fn tube_radius(&self) -> f64 {
        match self.kind {
            SurfaceKind::Torus => 0.5,
            SurfaceKind::HighCurv => 0.6,
            SurfaceKind::Sphere => 2.5,
            SurfaceKind::Dziuk => 0.3,
        }
    }

    pub fn phi(&self, x: Vec3) -> f64 {
        match self.kind {
            SurfaceKind::Torus => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                let q = 4.0 - rho;
                (q * q + x.z * x.z).sqrt() - 1.0
            }
            SurfaceKind::HighCurv => {
                let s = 1.0 + 0.5 * (std::f64::consts::PI * x.x).sin();
                0.25 * x.x * x.x + x.y * x.y + 4.0 * x.z * x.z / (s * s) - 1.0
            }
            SurfaceKind::Sphere => x.norm() - 1.0,
            SurfaceKind::Dziuk => {
                let w = x.x - x.z * x.z;
                w * w + x.y * x.y + x.z * x.z - 1.0
            }
        }
    }

    pub fn grad_phi(&self, x: Vec3) -> Vec3 {
        match self.kind {
            SurfaceKind::Torus => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                if rho < 1e-14 {
                    // on the symmetry axis the distance gradient is undefined
                    return Vec3::zeros();
                }
                let q = 4.0 - rho;
                let r = (q * q + x.z * x.z).sqrt();
                if r < 1e-14 {
                    return Vec3::zeros();
                }
                Vec3::new(-q * x.x / (rho * r), -q * x.y / (rho * r), x.z / r)
            }
            SurfaceKind::HighCurv => {
                let pi = std::f64::consts::PI;
                let s = 1.0 + 0.5 * (pi * x.x).sin();
                let sp = 0.5 * pi * (pi * x.x).cos();
                Vec3::new(
                    0.5 * x.x - 8.0 * x.z * x.z * sp / (s * s * s),
                    2.0 * x.y,
                    8.0 * x.z / (s * s),
                )
            }
            SurfaceKind::Sphere => {
                let r = x.norm();
                if r < 1e-14 {
                    return Vec3::zeros();
                }
                x / r
            }
            SurfaceKind::Dziuk => {
                let w = x.x - x.z * x.z;
                Vec3::new(2.0 * w, 2.0 * x.y, -4.0 * x.z * w + 2.0 * x.z)
            }
        }
    }

    pub fn hess_phi(&self, x: Vec3) -> Mat3 {
        match self.kind {
            SurfaceKind::Torus => {
                let rho2 = x.x * x.x + x.y * x.y;
                let rho = rho2.sqrt();
                let q = 4.0 - rho;
                let r = (q * q + x.z * x.z).sqrt();
                let rho3 = rho * rho2;
                let r3 = r * r * r;
                let z2 = x.z * x.z;
                let hxx = x.x * x.x * z2 / (rho2 * r3) - q * x.y * x.y / (r * rho3);
                let hyy = x.y * x.y * z2 / (rho2 * r3) - q * x.x * x.x / (r * rho3);
                let hxy = x.x * x.y * z2 / (rho2 * r3) + q * x.x * x.y / (r * rho3);
                let hxz = q * x.z * x.x / (rho * r3);
                let hyz = q * x.z * x.y / (rho * r3);
                let hzz = 1.0 / r - z2 / r3;
                Mat3::new(hxx, hxy, hxz, hxy, hyy, hyz, hxz, hyz, hzz)
            }
            SurfaceKind::HighCurv => {
                let pi = std::f64::consts::PI;
                let s = 1.0 + 0.5 * (pi * x.x).sin();
                let sp = 0.5 * pi * (pi * x.x).cos();
                let spp = -0.5 * pi * pi * (pi * x.x).sin();
                let s3 = s * s * s;
                let s4 = s3 * s;
                let hxx = 0.5 - 8.0 * x.z * x.z * (spp * s - 3.0 * sp * sp) / s4;
                let hxz = -16.0 * x.z * sp / s3;
                let hzz = 8.0 / (s * s);
                Mat3::new(hxx, 0.0, hxz, 0.0, 2.0, 0.0, hxz, 0.0, hzz)
            }
            SurfaceKind::Sphere => {
                let r = x.norm();
                let n = x / r;
                (Mat3::identity() - n * n.transpose()) / r
            }
            SurfaceKind::Dziuk => {
                let hxx = 2.0;
                let hxz = -4.0 * x.z;
                let hzz = -4.0 * x.x + 12.0 * x.z * x.z + 2.0;
                Mat3::new(hxx, 0.0, hxz, 0.0, 2.0, 0.0, hxz, 0.0, hzz)
            }
        }
    }

    /// Unit outward normal `grad phi / |grad phi|`.
    pub fn unit_normal(&self, x: Vec3) -> Result<Vec3, GeometryError> {
        let g = self.grad_phi(x);
        let gn = g.norm();
        if gn < DEGENERATE_GRADIENT_TOL {
            return Err(GeometryError::DegenerateGradient(x.x, x.y, x.z));
        }
        Ok(g / gn)
    }

    /// One Newton-like projection step: `x - phi(x) grad/|grad|^2`.
    ///
    /// Not exact on the surface in general; the residual is O(dist^2).
    pub fn project_first_order(&self, x: Vec3) -> Result<Vec3, GeometryError> {
        let g = self.grad_phi(x);
        let gn2 = g.norm_squared();
        if gn2.sqrt() < DEGENERATE_GRADIENT_TOL {
            return Err(GeometryError::DegenerateGradient(x.x, x.y, x.z));
        }
        let p = self.phi(x);
        let dist = p.abs() / gn2.sqrt();
        if dist > self.tube_radius() {
            return Err(GeometryError::OutsideTube {
                surface: self.name(),
                x: x.x,
                y: x.y,
                z: x.z,
                dist,
                tube: self.tube_radius(),
            });
        }
        Ok(x - g * (p / gn2))
    }

    /// Iterated first-order projection until `|phi| <= tol`.
    pub fn project_closest_point(&self, x: Vec3, tol: f64) -> Result<Vec3, GeometryError> {
        assert!(tol > 0.0, "projection tolerance must be positive");
        let mut y = x;
        for _ in 0..MAX_PROJECTION_ITERS {
            if self.phi(y).abs() <= tol {
                return Ok(y);
            }
            y = self.project_first_order(y)?;
        }
        let residual = self.phi(y).abs();
        if residual <= tol {
            Ok(y)
        } else {
            Err(GeometryError::ProjectionStalled {
                residual,
                iters: MAX_PROJECTION_ITERS,
            })
        }
    }

    /// Ambient divergence of the unit normal field,
    /// `(lap(phi) |grad|^2 - grad^T hess grad) / |grad|^3`.
    pub fn normal_divergence(&self, x: Vec3) -> Result<f64, GeometryError> {
        let g = self.grad_phi(x);
        let gn = g.norm();
        if gn < DEGENERATE_GRADIENT_TOL {
            return Err(GeometryError::DegenerateGradient(x.x, x.y, x.z));
        }
        let h = self.hess_phi(x);
        let lap = h.trace();
        Ok((lap * gn * gn - (g.transpose() * h * g)[(0, 0)]) / (gn * gn * gn))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ProblemKind {
    /// u = x - y on the torus.
    TorusLinear,
    /// u = x * y on the torus (smooth non-linear consistency benchmark).
    TorusProduct,
    /// u = x1 * x2 on the high-curvature surface.
    HighCurvProduct,
    /// u = sin^lambda(theta) sin(psi) on the unit sphere, singular at the poles.
    SphereSingular { lambda: f64 },
    /// u = exp(1/(1.85 - (x - 0.2)^2)) sin(y) on the Dziuk surface, with a
    /// zeroth-order term in the equation.
    DziukPeak,
}

/// A surface PDE with known exact solution; the right-hand side is derived
/// from the exact solution.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedProblem {
    kind: ProblemKind,
    surface: LevelSetSurface,
}

impl ManufacturedProblem {
    pub fn torus_xy() -> Self {
        Self { kind: ProblemKind::TorusLinear, surface: LevelSetSurface::torus() }
    }

    /// Smooth non-linear solution on the torus; used for consistency checks
    /// of the recovery operators without the FE solve.
    pub fn torus_product() -> Self {
        Self { kind: ProblemKind::TorusProduct, surface: LevelSetSurface::torus() }
    }

    pub fn highcurv_x1x2() -> Self {
        Self { kind: ProblemKind::HighCurvProduct, surface: LevelSetSurface::high_curvature() }
    }

    pub fn sphere_singular(lambda: f64) -> Self {
        Self {
            kind: ProblemKind::SphereSingular { lambda },
            surface: LevelSetSurface::unit_sphere(),
        }
    }

    pub fn dziuk_peak() -> Self {
        Self { kind: ProblemKind::DziukPeak, surface: LevelSetSurface::dziuk() }
    }

    pub fn by_name(name: &str) -> Result<Self, GeometryError> {
        match name {
            "torus_xy" => Ok(Self::torus_xy()),
            "torus_product" => Ok(Self::torus_product()),
            "highcurv_x1x2" => Ok(Self::highcurv_x1x2()),
            "sphere_singular" => Ok(Self::sphere_singular(0.6)),
            "dziuk_peak" => Ok(Self::dziuk_peak()),
            other => Err(GeometryError::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::TorusLinear => "torus_xy",
            ProblemKind::TorusProduct => "torus_product",
            ProblemKind::HighCurvProduct => "highcurv_x1x2",
            ProblemKind::SphereSingular { .. } => "sphere_singular",
            ProblemKind::DziukPeak => "dziuk_peak",
        }
    }

    pub fn surface(&self) -> &LevelSetSurface {
        &self.surface
    }

    /// Coefficient of the zeroth-order term: the equation solved is
    /// `-lap_g u + c u = f` with `c` either 0 or 1.
    pub fn zeroth_order_coefficient(&self) -> f64 {
        match self.kind {
            ProblemKind::DziukPeak => 1.0,
            _ => 0.0,
        }
    }

    /// Ambient extension of the exact solution.
    pub fn u_exact(&self, x: Vec3) -> f64 {
        match self.kind {
            ProblemKind::TorusLinear => x.x - x.y,
            ProblemKind::TorusProduct => x.x * x.y,
            ProblemKind::HighCurvProduct => x.x * x.y,
            ProblemKind::SphereSingular { lambda } => {
                let rho2 = x.x * x.x + x.y * x.y;
                if rho2 < 1e-300 {
                    return 0.0;
                }
                x.y * rho2.powf((lambda - 1.0) / 2.0)
            }
            ProblemKind::DziukPeak => {
                let w = x.x - 0.2;
                (1.0 / (1.85 - w * w)).exp() * x.y.sin()
            }
        }
    }

    /// Ambient gradient of the extension.
    pub fn grad_u_exact(&self, x: Vec3) -> Vec3 {
        match self.kind {
            ProblemKind::TorusLinear => Vec3::new(1.0, -1.0, 0.0),
            ProblemKind::TorusProduct | ProblemKind::HighCurvProduct => {
                Vec3::new(x.y, x.x, 0.0)
            }
            ProblemKind::SphereSingular { lambda } => {
                let p = (lambda - 1.0) / 2.0;
                let rho2 = x.x * x.x + x.y * x.y;
                if rho2 < 1e-300 {
                    return Vec3::new(f64::NAN, f64::NAN, f64::NAN);
                }
                let r2p1 = rho2.powf(p - 1.0);
                Vec3::new(
                    2.0 * p * x.x * x.y * r2p1,
                    rho2.powf(p) + 2.0 * p * x.y * x.y * r2p1,
                    0.0,
                )
            }
            ProblemKind::DziukPeak => {
                let w = x.x - 0.2;
                let d = 1.85 - w * w;
                let g = (1.0 / d).exp();
                let gp = g * 2.0 * w / (d * d);
                Vec3::new(gp * x.y.sin(), g * x.y.cos(), 0.0)
            }
        }
    }

    /// Ambient Hessian of the extension.
    pub fn hess_u_exact(&self, x: Vec3) -> Mat3 {
        match self.kind {
            ProblemKind::TorusLinear => Mat3::zeros(),
            ProblemKind::TorusProduct | ProblemKind::HighCurvProduct => {
                Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
            ProblemKind::SphereSingular { lambda } => {
                let p = (lambda - 1.0) / 2.0;
                let rho2 = x.x * x.x + x.y * x.y;
                if rho2 < 1e-300 {
                    return Mat3::from_element(f64::NAN);
                }
                let r2p1 = rho2.powf(p - 1.0);
                let r2p2 = rho2.powf(p - 2.0);
                let hxx = 2.0 * p * x.y * r2p1 + 4.0 * p * (p - 1.0) * x.x * x.x * x.y * r2p2;
                let hxy = 2.0 * p * x.x * r2p1 + 4.0 * p * (p - 1.0) * x.x * x.y * x.y * r2p2;
                let hyy = 6.0 * p * x.y * r2p1 + 4.0 * p * (p - 1.0) * x.y * x.y * x.y * r2p2;
                Mat3::new(hxx, hxy, 0.0, hxy, hyy, 0.0, 0.0, 0.0, 0.0)
            }
            ProblemKind::DziukPeak => {
                let w = x.x - 0.2;
                let d = 1.85 - w * w;
                let g = (1.0 / d).exp();
                let dp = 2.0 * w / (d * d);
                let gp = g * dp;
                let gpp = g * (dp * dp + 2.0 / (d * d) + 8.0 * w * w / (d * d * d));
                Mat3::new(
                    gpp * x.y.sin(),
                    gp * x.y.cos(),
                    0.0,
                    gp * x.y.cos(),
                    -g * x.y.sin(),
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                )
            }
        }
    }

    /// Surface gradient `(I - n n^T) grad u` at a point on the surface.
    pub fn tangential_gradient(&self, x: Vec3) -> Result<Vec3, GeometryError> {
        let p = self.surface.phi(x).abs();
        if p > 1e-10 {
            return Err(GeometryError::NotOnSurface(p));
        }
        let n = self.surface.unit_normal(x)?;
        let g = self.grad_u_exact(x);
        Ok(g - n * n.dot(&g))
    }

    /// Laplace-Beltrami of the solution at a point on the surface, via the
    /// ambient formula `lap u - n^T hess(u) n - (n . grad u) div(n)`.
    pub fn tangential_laplacian(&self, x: Vec3) -> Result<f64, GeometryError> {
        let p = self.surface.phi(x).abs();
        if p > 1e-10 {
            return Err(GeometryError::NotOnSurface(p));
        }
        let n = self.surface.unit_normal(x)?;
        let g = self.grad_u_exact(x);
        let h = self.hess_u_exact(x);
        let divn = self.surface.normal_divergence(x)?;
        Ok(h.trace() - (n.transpose() * h * n)[(0, 0)] - n.dot(&g) * divn)
    }

    /// Right-hand side `f = -lap_g u + c u` evaluated on the surface.
    ///
    /// The sphere problem uses its closed form on the sphere (the extension
    /// formula is ill-behaved near the poles).
    pub fn source_term(&self, x: Vec3) -> Result<f64, GeometryError> {
        if let ProblemKind::SphereSingular { lambda } = self.kind {
            let rho2 = x.x * x.x + x.y * x.y;
            if rho2 < 1e-300 {
                return Ok(0.0);
            }
            let u = self.u_exact(x);
            return Ok(lambda * (lambda + 1.0) * u
                + (1.0 - lambda * lambda) * x.y * rho2.powf((lambda - 3.0) / 2.0));
        }
        Ok(-self.tangential_laplacian(x)? + self.zeroth_order_coefficient() * self.u_exact(x))
    }
}
