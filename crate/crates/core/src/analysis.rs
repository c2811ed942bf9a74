//! Error measures against manufactured solutions, observed orders, and
//! numerical checks of the continuous surface identities.

use rayon::prelude::*;

use crate::assembly::ManufacturedProblem;
use crate::error::Result;
use crate::exact::ExactCalculus;
use crate::fe_space::{triangle_quadrature, BasisEval, FeSpace, ReferenceBasis};
use crate::geometry::LevelSetSurface;
use crate::jets::FieldExpr;
use crate::mesh::MappedMesh;
use crate::surface_ops::GeometryFrame;
use crate::{Mat3, Vec3};

/// Extra exactness of error integrals over the assembly rule.
pub const ERROR_QUAD_BOOST: usize = 2;

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_stream_tilde: f64,
    pub err_stream_ce: f64,
    pub err_vel_piola: f64,
    pub err_vel_ce: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamVariant {
    /// Reference `φ ∘ p̃`.
    Tilde,
    /// Closed-form `φ` evaluated on `Γ_h`.
    Ce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VelocityVariant {
    /// Exact velocity at `p̃(x)` carried to `Γ_h` by the approximate Piola map.
    Piola,
    /// Closed-form velocity evaluated on `Γ_h`.
    Ce,
}

/// Data available at one quadrature point of the mapped mesh.
pub struct QuadPoint<'a> {
    pub frame: &'a GeometryFrame,
    /// Quadrature weight times area element.
    pub weight: f64,
    pub element: usize,
    /// Field basis at the point, when integrating a discrete function.
    pub basis: Option<&'a BasisEval>,
    pub coeffs: Option<&'a [f64]>,
}

impl QuadPoint<'_> {
    fn field(&self) -> (f64, Vec3) {
        let (v, g, _) = self.basis.expect("no field attached").combine(self.coeffs.expect("no field attached"));
        (v, self.frame.gradient_from_ref(g))
    }

    /// `φ_h` at the point.
    pub fn value(&self) -> f64 {
        self.field().0
    }

    /// `curl_{Γ_h} φ_h` at the point.
    pub fn curl(&self) -> Vec3 {
        self.frame.normal.cross(&self.field().1)
    }
}

/// Sum of `f` times the measure over all quadrature points.
///
/// Elements are processed in parallel and reduced in element order.
pub fn integrate<const N: usize, F>(
    mesh: &MappedMesh,
    field: Option<(&FeSpace, &[f64])>,
    quad_order: usize,
    f: F,
) -> Result<[f64; N]>
where
    F: Fn(&QuadPoint) -> Result<[f64; N]> + Sync,
{
    let rule = triangle_quadrature(quad_order)?;
    let geo = ReferenceBasis::new(mesh.kg());
    let geo_evals: Vec<BasisEval> = rule.points.iter().map(|p| geo.eval(*p)).collect();
    let field_evals: Option<Vec<BasisEval>> =
        field.map(|(space, _)| rule.points.iter().map(|p| space.basis.eval(*p)).collect());
    let partial: Vec<[f64; N]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let nodes = mesh.element_nodes(t);
            let local_coeffs: Option<Vec<f64>> =
                field.map(|(space, c)| space.dofs.element_dofs(t).iter().map(|&g| c[g]).collect());
            let mut acc = [0.0; N];
            for q in 0..rule.len() {
                let frame = GeometryFrame::from_nodes(&nodes, &geo_evals[q], mesh.h_per_element[t], t)?;
                let point = QuadPoint {
                    frame: &frame,
                    weight: rule.weights[q] * frame.jacobian,
                    element: t,
                    basis: field_evals.as_ref().map(|e| &e[q]),
                    coeffs: local_coeffs.as_deref(),
                };
                let v = f(&point)?;
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += point.weight * b;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [0.0; N];
    for p in partial {
        for (a, b) in total.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(total)
}

fn stream_reference(problem: &ManufacturedProblem, x: &Vec3, variant: StreamVariant) -> Result<f64> {
    match variant {
        StreamVariant::Tilde => problem.stream_value(&problem.surface.approx_projection(x)?),
        StreamVariant::Ce => problem.stream_value(x),
    }
}

/// `L²(Γ_h)` error of `φ_h` after shifting it to the reference mean.
pub fn stream_error(
    mesh: &MappedMesh,
    space: &FeSpace,
    coeffs: &[f64],
    problem: &ManufacturedProblem,
    variant: StreamVariant,
    quad_order: usize,
) -> Result<f64> {
    let field = Some((space, coeffs));
    let [area, diff] = integrate(mesh, field, quad_order, |q| {
        Ok([1.0, stream_reference(problem, &q.frame.x, variant)? - q.value()])
    })?;
    let shift = diff / area;
    let [sq] = integrate(mesh, field, quad_order, |q| {
        let d = stream_reference(problem, &q.frame.x, variant)? - q.value() - shift;
        Ok([d * d])
    })?;
    Ok(sq.max(0.0).sqrt())
}

/// `v − a (b·v)/(a·b)`: the oblique projection along `a` onto the plane normal to `b`.
pub fn approximate_piola(a: &Vec3, b: &Vec3, v: &Vec3) -> Vec3 {
    v - a * (b.dot(v) / a.dot(b))
}

fn velocity_reference(problem: &ManufacturedProblem, frame: &GeometryFrame, variant: VelocityVariant) -> Result<Vec3> {
    match variant {
        VelocityVariant::Piola => {
            let y = problem.surface.approx_projection(&frame.x)?;
            let n = problem.surface.approx_normal(&y)?;
            Ok(approximate_piola(&n, &frame.normal, &problem.velocity(&y)?))
        }
        VelocityVariant::Ce => problem.velocity(&frame.x),
    }
}

/// `L²(Γ_h)` error of `curl_{Γ_h} φ_h`.
pub fn velocity_error(
    mesh: &MappedMesh,
    space: &FeSpace,
    coeffs: &[f64],
    problem: &ManufacturedProblem,
    variant: VelocityVariant,
    quad_order: usize,
) -> Result<f64> {
    let [sq] = integrate(mesh, Some((space, coeffs)), quad_order, |q| {
        let d = velocity_reference(problem, q.frame, variant)? - q.curl();
        Ok([d.norm_squared()])
    })?;
    Ok(sq.max(0.0).sqrt())
}

/// `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)`; `None` where an error is not positive.
pub fn observed_orders(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), hs.len(), "errors and mesh sizes differ in length");
    errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            let ok = e[0] > 0.0 && e[1] > 0.0 && h[0] > 0.0 && h[1] > 0.0 && h[0] != h[1];
            ok.then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect()
}

/// Least-squares slope of `ln e` against `ln h`. `None` with fewer than two
/// usable points or when all mesh sizes coincide.
pub fn fitted_order(errors: &[f64], hs: &[f64]) -> Option<f64> {
    assert_eq!(errors.len(), hs.len(), "errors and mesh sizes differ in length");
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Both sides of the closed-surface identity
/// `∫ΔφΔψ = 2∫(H(φ):H(ψ) + K∇φ·∇ψ)` on the unit sphere (`K = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IbpReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `∫ H(φ):H(ψ)`
    pub hess_like_product: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, or the absolute gap when both vanish.
    pub residual: f64,
}

/// Evaluate both sides with jet-based exact surface operators at the
/// quadrature points of a degree-`k_g` mesh of the unit sphere.
pub fn verify_global_ibp(phi: &FieldExpr, psi: &FieldExpr, level: usize, kg: usize, quad_order: usize) -> Result<IbpReport> {
    let surface = LevelSetSurface::unit_sphere();
    let mesh = MappedMesh::new(crate::mesh::BaseMesh::build(&surface, level)?, kg)?;
    let calc = ExactCalculus::new(surface);
    let [lhs, hh, gg] = integrate(&mesh, None, quad_order, |q| {
        let x = &q.frame.x;
        let lap = calc.laplace_beltrami(phi, x)? * calc.laplace_beltrami(psi, x)?;
        let h = calc.hess_like(phi, x)?.component_mul(&calc.hess_like(psi, x)?).sum();
        let g = calc.surface_gradient(phi, x)?.dot(&calc.surface_gradient(psi, x)?);
        Ok([lap, h, g])
    })?;
    let rhs = 2.0 * (hh + gg);
    let scale = lhs.abs().max(rhs.abs());
    let gap = (lhs - rhs).abs();
    Ok(IbpReport {
        lhs,
        rhs,
        hess_like_product: hh,
        residual: if scale > 0.0 { gap / scale } else { gap },
    })
}

/// Residuals of the Hessian identities at points of `Γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianIdentityReport {
    /// `max ‖P D̲²ψ − P ∇²(ψ∘p̃) P‖`
    pub extension: f64,
    /// `max ‖P (D̲²ψ − (D̲²ψ)ᵀ) P‖`
    pub antisymmetry: f64,
}

impl HessianIdentityReport {
    pub fn max(&self) -> f64 {
        self.extension.max(self.antisymmetry)
    }
}

pub fn verify_hessian_identities(surface: &LevelSetSurface, expr: &FieldExpr, points: &[Vec3]) -> Result<HessianIdentityReport> {
    let calc = ExactCalculus::new(*surface);
    let mut report = HessianIdentityReport {
        extension: 0.0,
        antisymmetry: 0.0,
    };
    for x in points {
        let p: Mat3 = calc.projector(x)?;
        let d2 = calc.nonsymmetric_hessian(expr, x)?;
        let ext = calc.extension_hessian(expr, x)?;
        report.extension = report.extension.max((p * d2 - p * ext * p).norm());
        report.antisymmetry = report.antisymmetry.max((p * (d2 - d2.transpose()) * p).norm());
    }
    Ok(report)
}

/// Maxima of the geometric approximation errors over quadrature points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricFidelity {
    /// `max |d̃|`
    pub distance: f64,
    /// `max |ñ − n_h|`
    pub normal: f64,
    /// `max |P_h ñ|`
    pub tangential_normal: f64,
}

pub fn geometric_fidelity(mesh: &MappedMesh, quad_order: usize) -> Result<GeometricFidelity> {
    let rule = triangle_quadrature(quad_order)?;
    let geo = ReferenceBasis::new(mesh.kg());
    let evals: Vec<BasisEval> = rule.points.iter().map(|p| geo.eval(*p)).collect();
    let surface = *mesh.surface();
    let per: Vec<[f64; 3]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let nodes = mesh.element_nodes(t);
            let mut m = [0.0f64; 3];
            for ev in &evals {
                let frame = GeometryFrame::from_nodes(&nodes, ev, mesh.h_per_element[t], t)?;
                let f = surface.approx_frame(&frame.x)?;
                m[0] = m[0].max(f.distance.abs());
                m[1] = m[1].max((f.normal - frame.normal).norm());
                m[2] = m[2].max((frame.projector * f.normal).norm());
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let m = per.iter().fold([0.0f64; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])]);
    Ok(GeometricFidelity {
        distance: m[0],
        normal: m[1],
        tangential_normal: m[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_examples() {
        let r = observed_orders(&[0.01297, 0.00353], &[0.2, 0.1]);
        assert!((r[0].unwrap() - 1.8774).abs() < 1e-4, "{r:?}");
        // order of the same errors before rounding to 4 digits
        assert!((r[0].unwrap() - 1.87457).abs() < 5e-3, "{r:?}");
        assert!((observed_orders(&[2.0, 1.0], &[1.0, 0.5])[0].unwrap() - 1.0).abs() < 1e-15);
        assert!((observed_orders(&[4.0, 1.0], &[2.0, 1.0])[0].unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(observed_orders(&[1.0, 0.0, 1.0], &[1.0, 0.5, 0.25]), vec![None, None]);
    }

    #[test]
    fn fitted_order_of_exact_power_law() {
        let hs = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powf(2.5)).collect();
        assert!((fitted_order(&e, &hs).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(fitted_order(&[1.0], &[0.5]), None);
        assert_eq!(fitted_order(&[1.0, 2.0], &[0.5, 0.5]), None);
    }

    #[test]
    fn piola_lands_in_discrete_tangent_plane() {
        let a = Vec3::new(0.1, 0.2, 1.0).normalize();
        let b = Vec3::new(0.0, -0.1, 1.0).normalize();
        let v = Vec3::new(0.3, -0.7, 0.2);
        assert!(approximate_piola(&a, &b, &v).dot(&b).abs() < 1e-15);
        // identity on vectors already tangent when both normals coincide
        let w = Vec3::new(0.4, 0.5, 0.0);
        let z = Vec3::z();
        assert_eq!(approximate_piola(&z, &z, &w), w);
    }

    #[test]
    fn hessian_identity_rotation_stream() {
        let s = LevelSetSurface::unit_sphere();
        let pts = [Vec3::new(0.0, 0.6, 0.8), Vec3::new(0.48, -0.6, 0.64)];
        let r = verify_hessian_identities(&s, &FieldExpr::x(2), &pts).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        let r = verify_hessian_identities(&s, &FieldExpr::c(2.0), &pts).unwrap();
        assert_eq!(r.max(), 0.0);
    }
}
