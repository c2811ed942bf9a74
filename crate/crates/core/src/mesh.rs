//! Octahedral base meshes with vertices on the surface, uniform refinement,
//! and the degree-`k_g` Lagrange-mapped mesh.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fe_space::{DofMap, NodeKind, ReferenceBasis};
use crate::geometry::LevelSetSurface;
use crate::Vec3;

/// One side of an edge: the triangle and the local edge index there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSide {
    pub triangle: usize,
    pub local_edge: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// `[lo, hi]` with `lo < hi`; this is the global orientation.
    pub vertices: [usize; 2],
    pub sides: [EdgeSide; 2],
}

/// Affine triangulation with vertices on the surface.
///
/// Local edge `j` of a triangle runs from its vertex `j` to vertex `j + 1 mod 3`.
#[derive(Clone, Debug)]
pub struct BaseMesh {
    pub surface: LevelSetSurface,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Global edge index of each local edge.
    pub triangle_edges: Vec<[usize; 3]>,
    pub level: usize,
}

fn build_edges(triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut partial: Vec<([usize; 2], Vec<EdgeSide>)> = Vec::new();
    let mut triangle_edges = vec![[0; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for j in 0..3 {
            let (a, b) = (tri[j], tri[(j + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = *lookup.entry(key).or_insert_with(|| {
                partial.push(([key.0, key.1], Vec::with_capacity(2)));
                partial.len() - 1
            });
            partial[e].1.push(EdgeSide {
                triangle: t,
                local_edge: j,
            });
            triangle_edges[t][j] = e;
        }
    }
    let mut edges = Vec::with_capacity(partial.len());
    for (vertices, sides) in partial {
        if sides.len() != 2 {
            return Err(Error::NonManifold(format!(
                "edge {:?} has {} incident triangles",
                vertices,
                sides.len()
            )));
        }
        let start = |s: &EdgeSide| triangles[s.triangle][s.local_edge];
        if start(&sides[0]) == start(&sides[1]) {
            return Err(Error::NonManifold(format!(
                "edge {vertices:?} is traversed in the same direction by both triangles"
            )));
        }
        edges.push(Edge {
            vertices,
            sides: [sides[0], sides[1]],
        });
    }
    Ok((edges, triangle_edges))
}

impl BaseMesh {
    pub fn from_parts(
        surface: LevelSetSurface,
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        level: usize,
    ) -> Result<Self> {
        let (edges, triangle_edges) = build_edges(&triangles)?;
        Ok(Self {
            surface,
            vertices,
            triangles,
            edges,
            triangle_edges,
            level,
        })
    }

    /// Octahedron inscribed in the surface, refined `level` times.
    pub fn build(surface: &LevelSetSurface, level: usize) -> Result<Self> {
        let a = surface.semi_axes();
        let vertices = vec![
            Vec3::new(a[0], 0.0, 0.0),
            Vec3::new(-a[0], 0.0, 0.0),
            Vec3::new(0.0, a[1], 0.0),
            Vec3::new(0.0, -a[1], 0.0),
            Vec3::new(0.0, 0.0, a[2]),
            Vec3::new(0.0, 0.0, -a[2]),
        ];
        let mut triangles = Vec::with_capacity(8);
        for sx in [0, 1] {
            for sy in [2, 3] {
                for sz in [4, 5] {
                    let (p, q, r) = (vertices[sx], vertices[sy], vertices[sz]);
                    let outward = (q - p).cross(&(r - p)).dot(&(p + q + r)) > 0.0;
                    triangles.push(if outward { [sx, sy, sz] } else { [sx, sz, sy] });
                }
            }
        }
        let mut mesh = Self::from_parts(*surface, vertices, triangles, 0)?;
        for _ in 0..level {
            mesh = mesh.refine()?;
        }
        Ok(mesh)
    }

    /// Uniform 4-split; edge midpoints are projected onto the surface.
    pub fn refine(&self) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for e in &self.edges {
            let mid = 0.5 * (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]);
            vertices.push(self.surface.project_default(&mid)?);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let m = self.triangle_edges[t].map(|e| nv + e);
            // m[j] is the midpoint of local edge (j, j+1)
            triangles.push([tri[0], m[0], m[2]]);
            triangles.push([m[0], tri[1], m[1]]);
            triangles.push([m[2], m[1], tri[2]]);
            triangles.push([m[0], m[1], m[2]]);
        }
        Self::from_parts(self.surface, vertices, triangles, self.level + 1)
    }

    /// Every edge has two incident triangles traversing it in opposite
    /// directions.
    pub fn check_manifold(&self) -> Result<()> {
        if self.edges.len() * 2 != self.triangles.len() * 3 {
            return Err(Error::NonManifold("edge/face count mismatch".into()));
        }
        for (ei, e) in self.edges.iter().enumerate() {
            let mut dirs = 0i32;
            for s in &e.sides {
                let tri = self.triangles[s.triangle];
                let (a, b) = (tri[s.local_edge], tri[(s.local_edge + 1) % 3]);
                if (a.min(b), a.max(b)) != (e.vertices[0], e.vertices[1]) {
                    return Err(Error::OrientationMismatch { edge: ei });
                }
                dirs += if a < b { 1 } else { -1 };
            }
            if dirs != 0 {
                return Err(Error::NonManifold(format!("edge {ei} is not consistently oriented")));
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Plain-text OFF listing at 17 significant digits.
    pub fn write_off<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} {}", self.vertices.len(), self.triangles.len(), self.edges.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Convenience wrapper matching [`BaseMesh::build`].
pub fn build_base_mesh(surface: &LevelSetSurface, level: usize) -> Result<BaseMesh> {
    BaseMesh::build(surface, level)
}

/// Polynomial-mapped mesh: each base triangle is the image of the reference
/// triangle under the degree-`k_g` Lagrange interpolant of the surface.
#[derive(Clone, Debug)]
pub struct MappedMesh {
    pub base: BaseMesh,
    kg: usize,
    /// Distinct geometry nodes; shared nodes are stored once.
    pub nodes: Vec<Vec3>,
    numbering: DofMap,
    pub h_per_element: Vec<f64>,
}

impl MappedMesh {
    pub fn new(base: BaseMesh, kg: usize) -> Result<Self> {
        if kg == 0 {
            return Err(Error::InvalidInput("geometric degree must be at least 1".into()));
        }
        let numbering = DofMap::new(&base, kg)?;
        let basis = ReferenceBasis::new(kg);
        let surface = base.surface;
        let mut nodes = vec![Vec3::zeros(); numbering.n_dofs()];
        nodes[..base.vertices.len()].copy_from_slice(&base.vertices);
        for (e, edge) in base.edges.iter().enumerate() {
            let (lo, hi) = (base.vertices[edge.vertices[0]], base.vertices[edge.vertices[1]]);
            for m in 1..kg {
                let s = m as f64 / kg as f64;
                nodes[numbering.edge_dof(e, m)] = surface.project_default(&(lo + s * (hi - lo)))?;
            }
        }
        for (t, tri) in base.triangles.iter().enumerate() {
            let ids = numbering.element_dofs(t);
            for i in 0..basis.len() {
                if basis.kind(i) == NodeKind::Interior {
                    let a = basis.alpha(i);
                    let k = kg as f64;
                    let x = (a[0] as f64 / k) * base.vertices[tri[0]]
                        + (a[1] as f64 / k) * base.vertices[tri[1]]
                        + (a[2] as f64 / k) * base.vertices[tri[2]];
                    nodes[ids[i]] = surface.project_default(&x)?;
                }
            }
        }
        let h_per_element = (0..base.triangles.len()).map(|t| base.diameter(t)).collect();
        Ok(Self {
            base,
            kg,
            nodes,
            numbering,
            h_per_element,
        })
    }

    pub fn kg(&self) -> usize {
        self.kg
    }

    pub fn surface(&self) -> &LevelSetSurface {
        &self.base.surface
    }

    pub fn n_elements(&self) -> usize {
        self.base.triangles.len()
    }

    /// Global geometry-node indices of element `t`, in reference-node order.
    pub fn element_node_ids(&self, t: usize) -> &[usize] {
        self.numbering.element_dofs(t)
    }

    pub fn element_nodes(&self, t: usize) -> Vec<Vec3> {
        self.element_node_ids(t).iter().map(|&i| self.nodes[i]).collect()
    }

    /// `(h_max, h_min)` over the affine base triangles.
    pub fn mesh_size(&self) -> (f64, f64) {
        self.h_per_element
            .iter()
            .fold((0.0, f64::INFINITY), |(mx, mn), &h| (mx.max(h), mn.min(h)))
    }
}

pub fn build_mapped_mesh(base: BaseMesh, kg: usize) -> Result<MappedMesh> {
    MappedMesh::new(base, kg)
}

pub fn mesh_size(mesh: &MappedMesh) -> (f64, f64) {
    mesh.mesh_size()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ell() -> LevelSetSurface {
        LevelSetSurface::reference_ellipsoid()
    }

    #[test]
    fn octahedron_counts() {
        let m = BaseMesh::build(&ell(), 0).unwrap();
        assert_eq!((m.vertices.len(), m.edges.len(), m.triangles.len()), (6, 12, 8));
        assert_eq!(ell().value(&m.vertices[2]), 0.0);
        for level in 0..4 {
            let m = BaseMesh::build(&ell(), level).unwrap();
            let p = 4usize.pow(level as u32);
            assert_eq!(m.triangles.len(), 8 * p);
            assert_eq!(m.edges.len(), 12 * p);
            assert_eq!(m.vertices.len(), 4 * p + 2);
            assert_eq!(m.euler_characteristic(), 2);
            m.check_manifold().unwrap();
            assert!(m.vertices.iter().all(|v| ell().value(v).abs() <= 1e-14));
        }
    }

    #[test]
    fn orientation_is_outward() {
        let m = BaseMesh::build(&ell(), 2).unwrap();
        for tri in &m.triangles {
            let [a, b, c] = tri.map(|v| m.vertices[v]);
            assert!((b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn refinement_shrinks_diameters() {
        let s = LevelSetSurface::unit_sphere();
        let mut m = BaseMesh::build(&s, 0).unwrap();
        let mut h = MappedMesh::new(m.clone(), 1).unwrap().mesh_size().0;
        assert!((h - 2f64.sqrt()).abs() < 1e-15);
        let r = m.refine().unwrap();
        assert_eq!(r.triangles.len(), 32);
        // the first two splits of the octahedron are far from uniform
        let expected = [(1.41, 1.42), (1.73, 1.74), (1.8, 2.2), (1.8, 2.2), (1.8, 2.2)];
        for (lo, hi) in expected {
            m = m.refine().unwrap();
            let h_new = MappedMesh::new(m.clone(), 1).unwrap().mesh_size().0;
            let ratio = h / h_new;
            assert!((lo..=hi).contains(&ratio), "ratio {ratio}");
            h = h_new;
        }
    }

    #[test]
    fn quasi_uniform_on_ellipsoid() {
        for level in 0..=4 {
            let m = MappedMesh::new(BaseMesh::build(&ell(), level).unwrap(), 1).unwrap();
            let (hmax, hmin) = m.mesh_size();
            assert!(hmax / hmin <= 2.5, "level {level}: {}", hmax / hmin);
        }
    }

    #[test]
    fn linear_geometry_nodes_are_vertices() {
        let base = BaseMesh::build(&ell(), 1).unwrap();
        let m = MappedMesh::new(base.clone(), 1).unwrap();
        for (t, tri) in base.triangles.iter().enumerate() {
            let nodes = m.element_nodes(t);
            for (i, v) in tri.iter().enumerate() {
                assert_eq!(nodes[i], base.vertices[*v]);
            }
        }
    }

    #[test]
    fn quadratic_sphere_midpoints_are_radial() {
        let s = LevelSetSurface::unit_sphere();
        let base = BaseMesh::build(&s, 1).unwrap();
        let m = MappedMesh::new(base.clone(), 2).unwrap();
        let numbering = DofMap::new(&base, 2).unwrap();
        for (e, edge) in base.edges.iter().enumerate() {
            let mid = 0.5 * (base.vertices[edge.vertices[0]] + base.vertices[edge.vertices[1]]);
            let node = m.nodes[numbering.edge_dof(e, 1)];
            assert!((node - mid.normalize()).norm() < 1e-15);
        }
    }

    #[test]
    fn shared_nodes_are_single_copies() {
        let base = BaseMesh::build(&ell(), 1).unwrap();
        let m = MappedMesh::new(base.clone(), 3).unwrap();
        for edge in &base.edges {
            let ids: Vec<Vec<usize>> = edge.sides.iter().map(|s| m.element_node_ids(s.triangle).to_vec()).collect();
            let shared = ids[0].iter().filter(|i| ids[1].contains(i)).count();
            assert_eq!(shared, 4); // two vertices + two edge nodes
        }
        assert!(m.nodes.iter().all(|x| ell().value(x).abs() <= 1e-14));
    }

    #[test]
    fn rejects_open_surface() {
        let s = LevelSetSurface::unit_sphere();
        let v = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        assert!(matches!(
            BaseMesh::from_parts(s, v, vec![[0, 1, 2]], 0),
            Err(Error::NonManifold(_))
        ));
    }

    #[test]
    fn off_dump() {
        let m = BaseMesh::build(&ell(), 0).unwrap();
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("OFF\n6 8 12\n"));
        assert_eq!(s.lines().count(), 2 + 6 + 8);
    }
}
