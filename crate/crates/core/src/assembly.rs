//! Global interior-penalty matrix, mean constraint, and load vector.
//!
//! The matrix is stored as `A₀ + σ A_pen` with both parts on one sparsity
//! pattern, so the penalty can be rescaled without reassembly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactCalculus;
use crate::fe_space::{edge_quadrature, triangle_quadrature, BasisEval, FeSpace, ReferenceBasis};
use crate::geometry::LevelSetSurface;
use crate::jets::FieldExpr;
use crate::linalg::CsrMatrix;
use crate::mesh::MappedMesh;
use crate::surface_ops::{edge_param, EdgeFrame, GeometryFrame};
use crate::{Mat3, Vec3};

pub fn default_sigma(k: usize) -> f64 {
    10.0 * (k * k) as f64
}

pub fn default_quad_order(k: usize) -> usize {
    2 * k + 2
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AssemblyOptions {
    /// Penalty parameter; `10k²` when unset.
    pub sigma: Option<f64>,
    /// Polynomial exactness of element and edge rules; `2k + 2` when unset.
    pub quad_order: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub space: FeSpace,
    /// `A₀ + σ A_pen`
    pub matrix: CsrMatrix,
    /// Bulk and consistency/symmetry terms.
    pub base: CsrMatrix,
    /// `Σ_e h_e⁻¹ ∫[∇φ][∇ψ]`
    pub penalty: CsrMatrix,
    /// `cᵢ = ∫ φᵢ`
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub quad_order: usize,
    pub kg: usize,
    pub level: usize,
}

impl AssembledSystem {
    pub fn k(&self) -> usize {
        self.space.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    /// The matrix with a different penalty. Any sign is accepted so that
    /// negative controls can be built.
    pub fn matrix_with_penalty(&self, sigma: f64) -> CsrMatrix {
        self.base
            .add_scaled(sigma, &self.penalty)
            .expect("parts share one pattern")
    }

    /// Area of `Γ_h`, `Σᵢ cᵢ` by partition of unity.
    pub fn area(&self) -> f64 {
        self.mean.iter().sum()
    }
}

/// Per-point data of the field basis mapped to the surface.
struct MappedBasis {
    grads: Vec<Vec3>,
    hess_like: Vec<Mat3>,
}

fn map_basis(eval: &BasisEval, frame: &GeometryFrame) -> MappedBasis {
    MappedBasis {
        grads: eval.grads.iter().map(|g| frame.gradient_from_ref(*g)).collect(),
        hess_like: eval
            .grads
            .iter()
            .zip(&eval.hessians)
            .map(|(g, h)| frame.hess_like_from_ref(*g, *h))
            .collect(),
    }
}

fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Local upper-triangle contributions `(row, col, base, penalty)`.
type Block = Vec<(usize, usize, f64, f64)>;

struct ElementBlock {
    entries: Block,
    mean: Vec<(usize, f64)>,
}

fn element_block(
    mesh: &MappedMesh,
    space: &FeSpace,
    t: usize,
    geo_evals: &[BasisEval],
    field_evals: &[BasisEval],
    weights: &[f64],
) -> Result<ElementBlock> {
    let nodes = mesh.element_nodes(t);
    let dofs = space.dofs.element_dofs(t);
    let n = dofs.len();
    let mut local = vec![0.0; n * n];
    let mut mean = vec![0.0; n];
    for q in 0..weights.len() {
        let frame = GeometryFrame::from_nodes(&nodes, &geo_evals[q], mesh.h_per_element[t], t)?;
        let w = weights[q] * frame.jacobian;
        let mb = map_basis(&field_evals[q], &frame);
        for i in 0..n {
            mean[i] += w * field_evals[q].values[i];
            for j in i..n {
                local[i * n + j] +=
                    w * (frobenius(&mb.hess_like[i], &mb.hess_like[j]) + mb.grads[i].dot(&mb.grads[j]));
            }
        }
    }
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (dofs[i].min(dofs[j]), dofs[i].max(dofs[j]));
            entries.push((a, b, local[i * n + j], 0.0));
        }
    }
    Ok(ElementBlock {
        entries,
        mean: dofs.iter().copied().zip(mean).collect(),
    })
}

fn edge_block(mesh: &MappedMesh, space: &FeSpace, e: usize, points: &[f64], weights: &[f64]) -> Result<Block> {
    let geo = ReferenceBasis::new(mesh.kg());
    let params = [edge_param(mesh, e, 0)?, edge_param(mesh, e, 1)?];
    let h_e = mesh.base.edge_length(e);

    // unique global dofs of the two-element patch
    let mut patch: Vec<usize> = Vec::new();
    let mut index = [Vec::new(), Vec::new()];
    for (side, p) in params.iter().enumerate() {
        for &g in space.dofs.element_dofs(p.triangle) {
            let pos = match patch.iter().position(|&x| x == g) {
                Some(pos) => pos,
                None => {
                    patch.push(g);
                    patch.len() - 1
                }
            };
            index[side].push(pos);
        }
    }
    let m = patch.len();
    let mut base = vec![0.0; m * m];
    let mut pen = vec![0.0; m * m];
    let nodes = [mesh.element_nodes(params[0].triangle), mesh.element_nodes(params[1].triangle)];

    for (&s, &wq) in points.iter().zip(weights) {
        let mut jump = vec![0.0; m];
        let mut avg = vec![0.0; m];
        let mut arc = 0.0;
        for side in 0..2 {
            let p = &params[side];
            let xi = p.point(s);
            let frame = GeometryFrame::from_nodes(&nodes[side], &geo.eval(xi), mesh.h_per_element[p.triangle], p.triangle)?;
            let ef = EdgeFrame::new(frame, p, xi);
            if side == 0 {
                arc = ef.arc;
            }
            let mb = map_basis(&space.basis.eval(xi), &ef.geometry);
            for (local, &pos) in index[side].iter().enumerate() {
                jump[pos] += mb.grads[local].dot(&ef.conormal);
                avg[pos] += 0.5 * (ef.tangent.transpose() * mb.hess_like[local] * ef.conormal)[0];
            }
        }
        let w = wq * arc;
        for i in 0..m {
            for j in i..m {
                base[i * m + j] -= w * (avg[j] * jump[i] + avg[i] * jump[j]);
                pen[i * m + j] += w * jump[i] * jump[j] / h_e;
            }
        }
    }
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in i..m {
            let (a, b) = (patch[i].min(patch[j]), patch[i].max(patch[j]));
            out.push((a, b, base[i * m + j], pen[i * m + j]));
        }
    }
    Ok(out)
}

/// Assemble the interior-penalty system of degree `k` on `mesh`.
pub fn assemble_system(mesh: &MappedMesh, k: usize, opts: &AssemblyOptions) -> Result<AssembledSystem> {
    let space = FeSpace::new(mesh, k)?;
    let sigma = opts.sigma.unwrap_or_else(|| default_sigma(k));
    if !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("penalty must be finite, got {sigma}")));
    }
    let quad_order = opts.quad_order.unwrap_or_else(|| default_quad_order(k));
    let tri = triangle_quadrature(quad_order)?;
    let edge = edge_quadrature(quad_order)?;
    let geo = ReferenceBasis::new(mesh.kg());
    let geo_evals: Vec<BasisEval> = tri.points.iter().map(|p| geo.eval(*p)).collect();
    let field_evals: Vec<BasisEval> = tri.points.iter().map(|p| space.basis.eval(*p)).collect();

    let elements: Vec<ElementBlock> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| element_block(mesh, &space, t, &geo_evals, &field_evals, &tri.weights))
        .collect::<Result<_>>()?;
    let edges: Vec<Block> = (0..mesh.base.edges.len())
        .into_par_iter()
        .map(|e| edge_block(mesh, &space, e, &edge.points, &edge.weights))
        .collect::<Result<_>>()?;

    let n = space.n_dofs();
    let mut mean = vec![0.0; n];
    let total: usize = elements.iter().map(|b| b.entries.len()).sum::<usize>() + edges.iter().map(Vec::len).sum::<usize>();
    let mut t_base = Vec::with_capacity(total);
    let mut t_pen = Vec::with_capacity(total);
    for blk in &elements {
        for &(g, v) in &blk.mean {
            mean[g] += v;
        }
    }
    for &(i, j, a, p) in elements.iter().flat_map(|b| &b.entries).chain(edges.iter().flatten()) {
        t_base.push((i, j, a));
        t_pen.push((i, j, p));
    }
    let base = CsrMatrix::from_upper_triplets(n, t_base)?;
    let penalty = CsrMatrix::from_upper_triplets(n, t_pen)?;
    let matrix = base.add_scaled(sigma, &penalty)?;
    Ok(AssembledSystem {
        space,
        matrix,
        base,
        penalty,
        mean,
        sigma,
        quad_order,
        kg: mesh.kg(),
        level: mesh.base.level,
    })
}

/// `ℓ(ψᵢ) = ∫ f · curl ψᵢ` for an ambient force field `f`.
pub fn assemble_rhs<F>(mesh: &MappedMesh, space: &FeSpace, quad_order: usize, force: F) -> Result<Vec<f64>>
where
    F: Fn(&Vec3) -> Result<Vec3> + Sync,
{
    let tri = triangle_quadrature(quad_order)?;
    let geo = ReferenceBasis::new(mesh.kg());
    let geo_evals: Vec<BasisEval> = tri.points.iter().map(|p| geo.eval(*p)).collect();
    let field_evals: Vec<BasisEval> = tri.points.iter().map(|p| space.basis.eval(*p)).collect();
    let locals: Vec<Vec<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let nodes = mesh.element_nodes(t);
            let mut local = vec![0.0; space.basis.len()];
            for q in 0..tri.len() {
                let frame = GeometryFrame::from_nodes(&nodes, &geo_evals[q], mesh.h_per_element[t], t)?;
                let f = force(&frame.x)?;
                let w = tri.weights[q] * frame.jacobian;
                for (i, g) in field_evals[q].grads.iter().enumerate() {
                    let curl = frame.normal.cross(&frame.gradient_from_ref(*g));
                    local[i] += w * f.dot(&curl);
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut rhs = vec![0.0; space.n_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (&g, v) in space.dofs.element_dofs(t).iter().zip(local) {
            rhs[g] += v;
        }
    }
    Ok(rhs)
}

/// Manufactured stream function and pressure on a surface.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub name: &'static str,
    pub surface: LevelSetSurface,
    pub stream: FieldExpr,
    pub pressure: FieldExpr,
}

impl ManufacturedProblem {
    /// `φ = e^{x₁}(cos x₂ + x₃)`, `p = x₁x₂x₃` on the reference ellipsoid.
    pub fn reference() -> Self {
        Self::smooth_on(LevelSetSurface::reference_ellipsoid())
    }

    /// The smooth stream and pressure pair on another surface.
    pub fn smooth_on(surface: LevelSetSurface) -> Self {
        Self {
            name: "smooth",
            surface,
            stream: FieldExpr::exp_cos_stream(),
            pressure: FieldExpr::triple_product(),
        }
    }

    /// Rigid rotation about `x₃` on the unit sphere: `φ = x₃`, `p = 0`.
    pub fn killing() -> Self {
        Self {
            name: "killing",
            surface: LevelSetSurface::unit_sphere(),
            stream: FieldExpr::x(2),
            pressure: FieldExpr::c(0.0),
        }
    }

    pub fn calculus(&self) -> ExactCalculus {
        ExactCalculus::new(self.surface)
    }

    pub fn force(&self, x: &Vec3) -> Result<Vec3> {
        self.calculus().stokes_force(&self.stream, &self.pressure, x)
    }

    pub fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        self.calculus().velocity(&self.stream, x)
    }

    pub fn stream_value(&self, x: &Vec3) -> Result<f64> {
        self.stream.value([x[0], x[1], x[2]])
    }
}

/// Load vector of a manufactured problem.
pub fn manufactured_rhs(mesh: &MappedMesh, sys: &AssembledSystem, problem: &ManufacturedProblem) -> Result<Vec<f64>> {
    assemble_rhs(mesh, &sys.space, sys.quad_order, |x| problem.force(x))
}
