//! Differential geometry of the mapped elements: frames, tangential
//! projection, surface gradient and Hessians, the Hessian-like operator,
//! surface curl, and edge co-normals.

use nalgebra::{Matrix2, Matrix3x2, Vector2};

use crate::error::{Error, Result};
use crate::fe_space::{BasisEval, ReferenceBasis};
use crate::mesh::MappedMesh;
use crate::{Mat3, Vec3};

/// Relative threshold on the area element, scaled by `h²`.
pub const DEGENERATE_JACOBIAN: f64 = 1e-14;

/// The matrix `ξ^×` with `ξ^× v = ξ × v`.
pub fn skew(xi: &Vec3) -> Mat3 {
    Mat3::new(0.0, -xi[2], xi[1], xi[2], 0.0, -xi[0], -xi[1], xi[0], 0.0)
}

/// Geometry of the map `F_T` at one reference point.
#[derive(Clone, Debug)]
pub struct GeometryFrame {
    pub x: Vec3,
    /// `[∂₁F, ∂₂F]`
    pub df: Matrix3x2<f64>,
    /// `∂₁₁F, ∂₁₂F, ∂₂₂F`
    pub d2f: [Vec3; 3],
    pub normal: Vec3,
    /// `|∂₁F × ∂₂F|`
    pub jacobian: f64,
    pub projector: Mat3,
    pub metric_inv: Matrix2<f64>,
    /// `DF (DFᵀDF)⁻¹`; maps reference gradients to surface gradients.
    pub pinv: Matrix3x2<f64>,
    /// `∂_a (DF (DFᵀDF)⁻¹)`
    dpinv: [Matrix3x2<f64>; 2],
}

impl GeometryFrame {
    /// Frame from element geometry nodes and the degree-`k_g` basis evaluated
    /// at the point. `h` scales the degeneracy test.
    pub fn from_nodes(nodes: &[Vec3], eval: &BasisEval, h: f64, element: usize) -> Result<Self> {
        let mut x = Vec3::zeros();
        let mut t = [Vec3::zeros(); 2];
        let mut d2f = [Vec3::zeros(); 3];
        for (i, p) in nodes.iter().enumerate() {
            x += eval.values[i] * p;
            t[0] += eval.grads[i][0] * p;
            t[1] += eval.grads[i][1] * p;
            for (d, c) in d2f.iter_mut().zip(&eval.hessians[i]) {
                *d += *c * p;
            }
        }
        let cross = t[0].cross(&t[1]);
        let jacobian = cross.norm();
        if !(jacobian > DEGENERATE_JACOBIAN * h * h) {
            return Err(Error::InvertedElement { element, jacobian });
        }
        let normal = cross / jacobian;
        let df = Matrix3x2::from_columns(&t);
        let metric = df.transpose() * df;
        let metric_inv = metric.try_inverse().ok_or(Error::InvertedElement { element, jacobian })?;
        let pinv = df * metric_inv;
        let dpinv = [0, 1].map(|a| {
            let ddf = Matrix3x2::from_columns(&[d2f[a], d2f[a + 1]]);
            let dmetric = ddf.transpose() * df + df.transpose() * ddf;
            ddf * metric_inv - pinv * dmetric * metric_inv
        });
        Ok(Self {
            x,
            df,
            d2f,
            normal,
            jacobian,
            projector: Mat3::identity() - normal * normal.transpose(),
            metric_inv,
            pinv,
            dpinv,
        })
    }

    /// `∇_{Γ_h}ψ` from the reference gradient of `ψ̂`.
    pub fn gradient_from_ref(&self, grad: [f64; 2]) -> Vec3 {
        self.pinv * Vector2::new(grad[0], grad[1])
    }

    /// Reference-coordinate derivatives `∂_a(∇_{Γ_h}ψ)` as the columns of a 3×2 matrix.
    fn gradient_derivatives(&self, grad: [f64; 2], hess: [f64; 3]) -> Matrix3x2<f64> {
        let g = Vector2::new(grad[0], grad[1]);
        let rows = [Vector2::new(hess[0], hess[1]), Vector2::new(hess[1], hess[2])];
        let cols = [0, 1].map(|a| self.dpinv[a] * g + self.pinv * rows[a]);
        Matrix3x2::from_columns(&cols)
    }

    /// `P_h (D v) P_h` for a vector field with reference derivatives `dv`.
    fn tangential_jacobian(&self, dv: &Matrix3x2<f64>) -> Mat3 {
        self.projector * (dv * self.pinv.transpose()) * self.projector
    }

    /// Projected surface Hessian from reference derivatives of `ψ̂`.
    pub fn hessian_from_ref(&self, grad: [f64; 2], hess: [f64; 3]) -> Mat3 {
        self.tangential_jacobian(&self.gradient_derivatives(grad, hess))
    }

    /// `½(n^× M − M n^×)` for a projected Hessian `M`.
    pub fn hess_like_from_hessian(&self, m: &Mat3) -> Mat3 {
        let s = skew(&self.normal);
        0.5 * (s * m - m * s)
    }

    pub fn hess_like_from_ref(&self, grad: [f64; 2], hess: [f64; 3]) -> Mat3 {
        self.hess_like_from_hessian(&self.hessian_from_ref(grad, hess))
    }

    /// `∂_a n_h`
    pub fn normal_derivative(&self, a: usize) -> Vec3 {
        let t1 = self.df.column(0).into_owned();
        let t2 = self.df.column(1).into_owned();
        let dcross = self.d2f[a].cross(&t2) + t1.cross(&self.d2f[a + 1]);
        self.projector * dcross / self.jacobian
    }

    /// `E_{Γ_h}(curl_{Γ_h} ψ)` computed from the Jacobian of the curl field.
    pub fn deformation_of_curl_from_ref(&self, grad: [f64; 2], hess: [f64; 3]) -> Mat3 {
        let v = self.gradient_from_ref(grad);
        let dv = self.gradient_derivatives(grad, hess);
        let cols = [0, 1].map(|a| {
            self.normal_derivative(a).cross(&v) + self.normal.cross(&dv.column(a).into_owned())
        });
        let j = self.tangential_jacobian(&Matrix3x2::from_columns(&cols));
        0.5 * (j + j.transpose())
    }
}

/// Frame of element `t` at reference point `xi`.
pub fn element_geometry(mesh: &MappedMesh, t: usize, xi: [f64; 2]) -> Result<GeometryFrame> {
    let eval = ReferenceBasis::new(mesh.kg()).eval(xi);
    GeometryFrame::from_nodes(&mesh.element_nodes(t), &eval, mesh.h_per_element[t], t)
}

pub fn surface_gradient(coeffs: &[f64], basis: &BasisEval, frame: &GeometryFrame) -> Vec3 {
    let (_, g, _) = basis.combine(coeffs);
    frame.gradient_from_ref(g)
}

pub fn surface_hessian(coeffs: &[f64], basis: &BasisEval, frame: &GeometryFrame) -> Mat3 {
    let (_, g, h) = basis.combine(coeffs);
    frame.hessian_from_ref(g, h)
}

pub fn hess_like(coeffs: &[f64], basis: &BasisEval, frame: &GeometryFrame) -> Mat3 {
    let (_, g, h) = basis.combine(coeffs);
    frame.hess_like_from_ref(g, h)
}

pub fn surface_curl(coeffs: &[f64], basis: &BasisEval, frame: &GeometryFrame) -> Vec3 {
    frame.normal.cross(&surface_gradient(coeffs, basis, frame))
}

/// Frobenius distance between the skew-formula `H_{Γ_h}` and the deformation
/// tensor of the curl field.
pub fn verify_hess_like_equiv(coeffs: &[f64], basis: &BasisEval, frame: &GeometryFrame) -> f64 {
    let (_, g, h) = basis.combine(coeffs);
    (frame.deformation_of_curl_from_ref(g, h) - frame.hess_like_from_ref(g, h)).norm()
}

/// Straight-line parametrization of one side of an edge in reference
/// coordinates, following the global edge orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeParam {
    pub triangle: usize,
    pub start: [f64; 2],
    pub dir: [f64; 2],
    /// `+1` when the element's counter-clockwise boundary runs along the
    /// global orientation, `−1` otherwise.
    pub sign: f64,
}

impl EdgeParam {
    pub fn point(&self, s: f64) -> [f64; 2] {
        [self.start[0] + s * self.dir[0], self.start[1] + s * self.dir[1]]
    }
}

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub fn edge_param(mesh: &MappedMesh, edge: usize, side: usize) -> Result<EdgeParam> {
    let base = &mesh.base;
    let e = &base.edges[edge];
    let s = e.sides[side];
    let tri = base.triangles[s.triangle];
    let (a, b) = (s.local_edge, (s.local_edge + 1) % 3);
    let [lo, hi] = e.vertices;
    let (from, to, sign) = if tri[a] == lo && tri[b] == hi {
        (a, b, 1.0)
    } else if tri[a] == hi && tri[b] == lo {
        (b, a, -1.0)
    } else {
        return Err(Error::OrientationMismatch { edge });
    };
    let (p, q) = (REF_VERTICES[from], REF_VERTICES[to]);
    Ok(EdgeParam {
        triangle: s.triangle,
        start: p,
        dir: [q[0] - p[0], q[1] - p[1]],
        sign,
    })
}

/// Frame at one point of one element-side of an edge.
#[derive(Clone, Debug)]
pub struct EdgeFrame {
    pub geometry: GeometryFrame,
    pub xi: [f64; 2],
    /// `t = n × μ`, the counter-clockwise boundary tangent.
    pub tangent: Vec3,
    /// Outward unit co-normal `μ`.
    pub conormal: Vec3,
    /// `|dx/ds|`
    pub arc: f64,
}

impl EdgeFrame {
    pub fn new(geometry: GeometryFrame, param: &EdgeParam, xi: [f64; 2]) -> Self {
        let dx = geometry.df * Vector2::new(param.dir[0], param.dir[1]);
        let arc = dx.norm();
        let tangent = param.sign * dx / arc;
        let conormal = tangent.cross(&geometry.normal);
        Self {
            geometry,
            xi,
            tangent,
            conormal,
            arc,
        }
    }

    pub fn x(&self) -> Vec3 {
        self.geometry.x
    }

    pub fn normal(&self) -> Vec3 {
        self.geometry.normal
    }
}

/// Frame on `side` (0 or 1) of `edge` at global arclength parameter `s ∈ [0, 1]`.
pub fn edge_frame(mesh: &MappedMesh, edge: usize, side: usize, s: f64) -> Result<EdgeFrame> {
    let param = edge_param(mesh, edge, side)?;
    let xi = param.point(s);
    let geometry = element_geometry(mesh, param.triangle, xi)?;
    Ok(EdgeFrame::new(geometry, &param, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSetSurface;
    use crate::mesh::BaseMesh;

    fn flat_frame(kg: usize) -> GeometryFrame {
        // the triangle (0,0,0), (2,0,0), (0,1,0) in the x₁x₂-plane
        let basis = ReferenceBasis::new(kg);
        let nodes: Vec<Vec3> = (0..basis.len())
            .map(|i| {
                let [u, v] = basis.node(i);
                Vec3::new(2.0 * u, v, 0.0)
            })
            .collect();
        GeometryFrame::from_nodes(&nodes, &basis.eval([0.2, 0.3]), 1.0, 0).unwrap()
    }

    #[test]
    fn skew_identities() {
        let e1 = Vec3::x();
        assert_eq!(skew(&Vec3::z()) * e1, Vec3::y());
        let xi = Vec3::new(0.3, -1.2, 2.0);
        assert!((skew(&xi) * xi).norm() < 1e-15);
        assert_eq!(skew(&xi).transpose(), -skew(&xi));
    }

    #[test]
    fn flat_element_quantities() {
        let f = flat_frame(1);
        assert_eq!(f.normal, Vec3::z());
        assert!((f.jacobian - 2.0).abs() < 1e-15);
        // ψ̂ = ξ₁ corresponds to x₁/2
        let g = f.gradient_from_ref([1.0, 0.0]);
        assert!((g - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        // ψ̂ = ξ₁² ↦ x₁²/4: Hessian entry (1,1) = 1/2
        let m = f.hessian_from_ref([0.0, 0.0], [2.0, 0.0, 0.0]);
        let expect = Mat3::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((m - expect).norm() < 1e-14);
        let h = f.hess_like_from_hessian(&m);
        assert!(h.trace().abs() < 1e-15);
        assert!((h - h.transpose()).norm() < 1e-15);
        let r = (f.deformation_of_curl_from_ref([0.3, -0.1], [2.0, 0.4, -1.0])
            - f.hess_like_from_ref([0.3, -0.1], [2.0, 0.4, -1.0]))
        .norm();
        assert!(r < 1e-14);
    }

    #[test]
    fn degenerate_element_rejected() {
        let basis = ReferenceBasis::new(1);
        let nodes = [Vec3::zeros(), Vec3::x(), 2.0 * Vec3::x()];
        assert!(matches!(
            GeometryFrame::from_nodes(&nodes, &basis.eval([0.2, 0.2]), 1.0, 7),
            Err(Error::InvertedElement { element: 7, .. })
        ));
    }

    #[test]
    fn edge_sides_agree_on_position() {
        let mesh = MappedMesh::new(BaseMesh::build(&LevelSetSurface::reference_ellipsoid(), 1).unwrap(), 3).unwrap();
        for e in 0..mesh.base.edges.len() {
            for s in [0.0, 0.21, 0.5, 1.0] {
                let a = edge_frame(&mesh, e, 0, s).unwrap();
                let b = edge_frame(&mesh, e, 1, s).unwrap();
                assert!((a.x() - b.x()).norm() < 1e-14);
                assert!((a.tangent + b.tangent).norm() < 1e-13);
                for f in [&a, &b] {
                    assert!((f.conormal.norm() - 1.0).abs() < 1e-14);
                    assert!(f.conormal.dot(&f.tangent).abs() < 1e-14);
                    assert!(f.conormal.dot(&f.normal()).abs() < 1e-14);
                    assert!((f.normal().cross(&f.conormal) - f.tangent).norm() < 1e-14);
                }
                // outward: moving along μ leaves the element, i.e. toward the other side's centroid
                let ca = element_geometry(&mesh, mesh.base.edges[e].sides[0].triangle, [1.0 / 3.0; 2]).unwrap().x;
                assert!(a.conormal.dot(&(ca - a.x())) < 0.0);
            }
        }
    }
}
