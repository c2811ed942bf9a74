use super::basis::{NodeKind, ReferenceBasis};
use crate::error::Result;
use crate::mesh::BaseMesh;

/// Global numbering of the degree-`k` Lagrange nodes of a triangulation.
///
/// Vertices come first (index = vertex index), then `k − 1` nodes per edge
/// ordered from the lower to the higher vertex index, then the interior nodes
/// of each triangle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    degree: usize,
    per_element: usize,
    element_dofs: Vec<usize>,
    n_vertices: usize,
    n_edges: usize,
    n_dofs: usize,
}

impl DofMap {
    /// Numbering for any degree `k ≥ 1`; also used for geometry nodes.
    pub fn new(mesh: &BaseMesh, degree: usize) -> Result<Self> {
        mesh.check_manifold()?;
        let basis = ReferenceBasis::new(degree);
        let nv = mesh.vertices.len();
        let ne = mesh.edges.len();
        let per_edge = degree - 1;
        let per_face = if degree >= 3 { (degree - 1) * (degree - 2) / 2 } else { 0 };
        let n_dofs = nv + per_edge * ne + per_face * mesh.triangles.len();

        let mut element_dofs = Vec::with_capacity(basis.len() * mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut interior = 0;
            for i in 0..basis.len() {
                let alpha = basis.alpha(i);
                let g = match basis.kind(i) {
                    NodeKind::Vertex(v) => tri[v],
                    NodeKind::Edge { edge } => {
                        let (a, b) = (edge, (edge + 1) % 3);
                        let e = mesh.triangle_edges[t][edge];
                        let lo = mesh.edges[e].vertices[0];
                        let m = if tri[a] == lo { alpha[b] } else { alpha[a] };
                        nv + e * per_edge + (m - 1)
                    }
                    NodeKind::Interior => {
                        interior += 1;
                        nv + ne * per_edge + t * per_face + interior - 1
                    }
                };
                element_dofs.push(g);
            }
        }
        Ok(Self {
            degree,
            per_element: basis.len(),
            element_dofs,
            n_vertices: nv,
            n_edges: ne,
            n_dofs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_elements(&self) -> usize {
        self.element_dofs.len() / self.per_element
    }

    pub fn dofs_per_element(&self) -> usize {
        self.per_element
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t * self.per_element..(t + 1) * self.per_element]
    }

    /// Global index of the `m`-th node (`1 ≤ m < k`) on edge `e`, counted
    /// from its lower vertex.
    pub fn edge_dof(&self, e: usize, m: usize) -> usize {
        debug_assert!(m >= 1 && m < self.degree && e < self.n_edges);
        self.n_vertices + e * (self.degree - 1) + m - 1
    }
}
