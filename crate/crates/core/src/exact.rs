//! Tangential calculus on the continuous surface, evaluated with jets.
//!
//! Every operator here uses the level-set normal `ñ = ∇Ψ/|∇Ψ|` and the
//! ambient expression of the field. On `Γ` the results are the exact surface
//! operators; off `Γ` they define the closed-form ambient extensions used for
//! forcing and error measurement.

use crate::error::Result;
use crate::geometry::LevelSetSurface;
use crate::jets::{FieldExpr, Jet3};
use crate::{Mat3, Vec3};

type JetVec = [Jet3; 3];
type JetMat = [[Jet3; 3]; 3];

fn arr(x: &Vec3) -> [f64; 3] {
    [x[0], x[1], x[2]]
}

fn values(v: &JetVec) -> Vec3 {
    Vec3::new(v[0].value, v[1].value, v[2].value)
}

fn mat_values(m: &JetMat) -> Mat3 {
    Mat3::from_fn(|i, j| m[i][j].value)
}

fn dot(a: &JetVec, b: &JetVec) -> Jet3 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &JetVec, b: &JetVec) -> JetVec {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn matmul(a: &JetMat, b: &JetMat) -> JetMat {
    let mut c = [[Jet3::constant(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

fn gradient(f: &Jet3) -> JetVec {
    [f.derivative(0), f.derivative(1), f.derivative(2)]
}

fn jacobian(v: &JetVec) -> JetMat {
    [gradient(&v[0]), gradient(&v[1]), gradient(&v[2])]
}

/// `ñ` as jets; meaningful up to second order.
fn normal_jets(surface: &LevelSetSurface, x: &Vec3) -> Result<JetVec> {
    // validates the gradient
    surface.approx_frame(x)?;
    let psi = surface.eval(x, 3)?;
    let g = gradient(&psi);
    let inv = dot(&g, &g).sqrt()?.recip()?;
    Ok([g[0] * inv, g[1] * inv, g[2] * inv])
}

fn projector(n: &JetVec) -> JetMat {
    let mut p = [[Jet3::constant(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = -(n[i] * n[j]);
        }
        p[i][i] = p[i][i] + 1.0;
    }
    p
}

/// `P̃∇f` from a third-order jet of `f`.
fn tangential_gradient(f: &Jet3, n: &JetVec) -> JetVec {
    let d = gradient(f);
    let nd = dot(n, &d);
    [d[0] - n[0] * nd, d[1] - n[1] * nd, d[2] - n[2] * nd]
}

/// Exact surface operators of scalar fields on a level-set surface.
#[derive(Clone, Copy, Debug)]
pub struct ExactCalculus {
    pub surface: LevelSetSurface,
}

impl ExactCalculus {
    pub fn new(surface: LevelSetSurface) -> Self {
        Self { surface }
    }

    pub fn normal(&self, x: &Vec3) -> Result<Vec3> {
        self.surface.approx_normal(x)
    }

    pub fn projector(&self, x: &Vec3) -> Result<Mat3> {
        let n = self.normal(x)?;
        Ok(Mat3::identity() - n * n.transpose())
    }

    pub fn surface_gradient(&self, expr: &FieldExpr, x: &Vec3) -> Result<Vec3> {
        let n = normal_jets(&self.surface, x)?;
        Ok(values(&tangential_gradient(&expr.jet(arr(x))?, &n)))
    }

    /// The non-symmetric Hessian `D̲²ψ`, rows `∇_Γ(D̲ᵢψ)ᵀ`.
    pub fn nonsymmetric_hessian(&self, expr: &FieldExpr, x: &Vec3) -> Result<Mat3> {
        let n = normal_jets(&self.surface, x)?;
        let g = tangential_gradient(&expr.jet(arr(x))?, &n);
        let dg = mat_values(&jacobian(&g));
        Ok(dg * self.projector(x)?)
    }

    /// The projected surface Hessian `P D̲²ψ`.
    pub fn surface_hessian(&self, expr: &FieldExpr, x: &Vec3) -> Result<Mat3> {
        Ok(self.projector(x)? * self.nonsymmetric_hessian(expr, x)?)
    }

    /// `H_Γ(ψ) = ½(n^× ∇²_Γψ − ∇²_Γψ n^×)`.
    pub fn hess_like(&self, expr: &FieldExpr, x: &Vec3) -> Result<Mat3> {
        let m = self.surface_hessian(expr, x)?;
        let s = crate::surface_ops::skew(&self.normal(x)?);
        Ok(0.5 * (s * m - m * s))
    }

    pub fn laplace_beltrami(&self, expr: &FieldExpr, x: &Vec3) -> Result<f64> {
        Ok(self.surface_hessian(expr, x)?.trace())
    }

    /// `ñ × P̃∇φ`, the velocity of the stream function `φ`.
    pub fn velocity(&self, stream: &FieldExpr, x: &Vec3) -> Result<Vec3> {
        let n = normal_jets(&self.surface, x)?;
        let g = tangential_gradient(&stream.jet(arr(x))?, &n);
        Ok(values(&cross(&n, &g)))
    }

    /// Hessian of the extension `ψ ∘ p̃`, differentiated through `p̃`.
    pub fn extension_hessian(&self, expr: &FieldExpr, x: &Vec3) -> Result<Mat3> {
        let seed = Jet3::seed(arr(x));
        let psi = self.surface.eval(x, 3)?;
        let g = gradient(&psi);
        let scale = psi.try_div(&dot(&g, &g))?;
        let proj = [
            seed[0] - g[0] * scale,
            seed[1] - g[1] * scale,
            seed[2] - g[2] * scale,
        ];
        let ext = expr.eval_with(&proj)?;
        Ok(Mat3::from_fn(|i, j| ext.hess(i, j)))
    }

    /// Momentum forcing `−P̃ div_Γ E(u) + u + P̃∇p` for `u = curl_Γ φ`.
    pub fn stokes_force(&self, stream: &FieldExpr, pressure: &FieldExpr, x: &Vec3) -> Result<Vec3> {
        let n = normal_jets(&self.surface, x)?;
        let p = projector(&n);
        let g = tangential_gradient(&stream.jet(arr(x))?, &n);
        let u = cross(&n, &g);
        let du = jacobian(&u);
        let t = matmul(&matmul(&p, &du), &p);

        // row-wise tangential divergence of E = sym(T); only values survive
        let pv = mat_values(&p);
        let mut div_e = Vec3::zeros();
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    let d_e = 0.5 * (t[i][j].grad[k] + t[j][i].grad[k]);
                    s += pv[(j, k)] * d_e;
                }
            }
            div_e[i] = s;
        }
        let grad_p = Vec3::from(pressure.jet(arr(x))?.grad);
        Ok(-(pv * div_e) + values(&u) + pv * grad_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn killing_force_on_sphere() {
        let calc = ExactCalculus::new(LevelSetSurface::unit_sphere());
        let x = Vec3::new(1.0, 0.0, 0.0);
        let f = calc
            .stokes_force(&FieldExpr::x(2), &FieldExpr::c(0.0), &x)
            .unwrap();
        assert!((f - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-14, "{f}");
        let u = calc.velocity(&FieldExpr::x(2), &x).unwrap();
        assert!((u - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn harmonic_laplacian_on_sphere() {
        let calc = ExactCalculus::new(LevelSetSurface::unit_sphere());
        let x = Vec3::new(0.48, -0.6, 0.64);
        let phi = FieldExpr::x(0) * FieldExpr::x(1);
        let lb = calc.laplace_beltrami(&phi, &x).unwrap();
        assert!((lb + 6.0 * x[0] * x[1]).abs() < 1e-13);
        let lb = calc.laplace_beltrami(&FieldExpr::x(2), &x).unwrap();
        assert!((lb + 2.0 * x[2]).abs() < 1e-13);
    }

    #[test]
    fn hess_like_vanishes_for_rotation_stream() {
        let calc = ExactCalculus::new(LevelSetSurface::unit_sphere());
        let x = Vec3::new(0.0, 0.6, 0.8);
        let h = calc.hess_like(&FieldExpr::x(2), &x).unwrap();
        assert!(h.norm() < 1e-14);
    }
}
