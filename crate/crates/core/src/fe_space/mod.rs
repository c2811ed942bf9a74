//! Reference Lagrange bases, quadrature rules, and the global C⁰ numbering.

mod basis;
mod dofmap;
mod quadrature;

pub use basis::{BasisEval, NodeKind, ReferenceBasis};
pub use dofmap::DofMap;
pub use quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, TriangleRule, MAX_QUADRATURE_ORDER};

use crate::error::{Error, Result};
use crate::mesh::MappedMesh;

/// A degree-`k` continuous Lagrange space on a mapped mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub basis: ReferenceBasis,
    pub dofs: DofMap,
}

impl FeSpace {
    pub fn new(mesh: &MappedMesh, k: usize) -> Result<Self> {
        Ok(Self {
            basis: ReferenceBasis::new(k),
            dofs: build_dof_map(mesh, k)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Nodal interpolant of an ambient function evaluated at the mapped nodes.
    pub fn interpolate<F>(&self, mesh: &MappedMesh, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&crate::Vec3) -> Result<f64>,
    {
        let mut out = vec![f64::NAN; self.n_dofs()];
        let geo = ReferenceBasis::new(mesh.kg());
        for t in 0..mesh.n_elements() {
            let nodes = mesh.element_nodes(t);
            for (local, &g) in self.dofs.element_dofs(t).iter().enumerate() {
                if out[g].is_nan() {
                    let xi = self.basis.node(local);
                    let ev = geo.eval(xi);
                    let x = ev.values.iter().zip(&nodes).fold(crate::Vec3::zeros(), |acc, (w, p)| acc + *w * p);
                    out[g] = f(&x)?;
                }
            }
        }
        Ok(out)
    }
}

/// Global C⁰ numbering of degree `k ≥ 2` on the mesh.
pub fn build_dof_map(mesh: &MappedMesh, k: usize) -> Result<DofMap> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("field degree must be at least 2, got {k}")));
    }
    DofMap::new(&mesh.base, k)
}
