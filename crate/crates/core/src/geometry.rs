//! Analytic level-set surfaces and the gradient-based approximations of the
//! normal, signed distance and closest point.

use crate::error::{Error, Result};
use crate::jets::Jet3;
use crate::Vec3;

/// Gradients smaller than this are treated as singular.
pub const GRAD_EPS: f64 = 1e-12;
/// Default residual tolerance `|Ψ(y)|` for [`LevelSetSurface::project`].
pub const PROJECT_TOL: f64 = 1e-14;
/// Default iteration cap for [`LevelSetSurface::project`].
pub const PROJECT_MAX_ITER: usize = 30;
/// Highest derivative order the closed forms provide.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceKind {
    UnitSphere,
    /// Semi-axes `(a₁, a₂, a₃)`.
    Ellipsoid([f64; 3]),
}

/// Closed surface `{Ψ = 0}` with `Ψ(x) = Σ xᵢ²/aᵢ² − 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSetSurface {
    pub kind: SurfaceKind,
}

/// Approximate geometric quantities at an ambient point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePointFrame {
    pub point: Vec3,
    /// `∇Ψ/|∇Ψ|`
    pub normal: Vec3,
    /// `Ψ/|∇Ψ|`
    pub distance: f64,
    /// `point − distance·normal`
    pub projection: Vec3,
}

impl LevelSetSurface {
    pub fn unit_sphere() -> Self {
        Self {
            kind: SurfaceKind::UnitSphere,
        }
    }

    pub fn ellipsoid(axes: [f64; 3]) -> Self {
        assert!(axes.iter().all(|a| *a > 0.0), "semi-axes must be positive");
        Self {
            kind: SurfaceKind::Ellipsoid(axes),
        }
    }

    /// The ellipsoid `x₁² + x₂²/2 + x₃²/2 = 1`.
    pub fn reference_ellipsoid() -> Self {
        Self::ellipsoid([1.0, 2f64.sqrt(), 2f64.sqrt()])
    }

    pub fn semi_axes(&self) -> [f64; 3] {
        match self.kind {
            SurfaceKind::UnitSphere => [1.0; 3],
            SurfaceKind::Ellipsoid(a) => a,
        }
    }

    pub fn eval_order(&self) -> usize {
        MAX_ORDER
    }

    fn inv_sq(&self) -> [f64; 3] {
        let a = self.semi_axes();
        [1.0 / (a[0] * a[0]), 1.0 / (a[1] * a[1]), 1.0 / (a[2] * a[2])]
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        let c = self.inv_sq();
        c[0] * x[0] * x[0] + c[1] * x[1] * x[1] + c[2] * x[2] * x[2] - 1.0
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let c = self.inv_sq();
        Vec3::new(2.0 * c[0] * x[0], 2.0 * c[1] * x[1], 2.0 * c[2] * x[2])
    }

    /// Jet of Ψ at `x`; entries above `order` are left zero.
    pub fn eval(&self, x: &Vec3, order: usize) -> Result<Jet3> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: MAX_ORDER,
            });
        }
        let c = self.inv_sq();
        let grad = if order >= 1 {
            self.gradient(x).into()
        } else {
            [0.0; 3]
        };
        let mut hess = [[0.0; 3]; 3];
        if order >= 2 {
            for i in 0..3 {
                hess[i][i] = 2.0 * c[i];
            }
        }
        Ok(Jet3::from_parts(self.value(x), grad, hess, |_, _, _| 0.0))
    }

    /// The approximate normal, distance and closest point at `x`.
    pub fn approx_frame(&self, x: &Vec3) -> Result<SurfacePointFrame> {
        let g = self.gradient(x);
        let norm = g.norm();
        if norm <= GRAD_EPS {
            return Err(Error::SingularPoint {
                x: x[0],
                y: x[1],
                z: x[2],
            });
        }
        let normal = g / norm;
        let distance = self.value(x) / norm;
        Ok(SurfacePointFrame {
            point: *x,
            normal,
            distance,
            projection: x - distance * normal,
        })
    }

    pub fn approx_normal(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.approx_frame(x)?.normal)
    }

    pub fn approx_projection(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.approx_frame(x)?.projection)
    }

    /// Iterate `y ← p̃(y)` until `|Ψ(y)| ≤ tol`.
    pub fn project(&self, x: &Vec3, tol: f64, max_iter: usize) -> Result<Vec3> {
        let mut y = *x;
        let mut residual = self.value(&y).abs();
        for _ in 0..max_iter {
            if residual <= tol {
                return Ok(y);
            }
            y = self.approx_projection(&y)?;
            residual = self.value(&y).abs();
        }
        if residual <= tol {
            return Ok(y);
        }
        Err(Error::ProjectionFailed {
            iterations: max_iter,
            residual,
        })
    }

    /// [`Self::project`] with the default tolerance and iteration cap.
    pub fn project_default(&self, x: &Vec3) -> Result<Vec3> {
        self.project(x, PROJECT_TOL, PROJECT_MAX_ITER)
    }

    pub fn min_semi_axis(&self) -> f64 {
        self.semi_axes().into_iter().fold(f64::INFINITY, f64::min)
    }
}
