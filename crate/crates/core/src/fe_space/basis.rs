/// Position of a Lagrange node relative to the reference triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Vertex(usize),
    /// Node on local edge `edge` (from local vertex `edge` to `edge + 1 mod 3`).
    Edge { edge: usize },
    Interior,
}

/// Equispaced Lagrange basis of degree `k` on the reference triangle
/// `{(0,0), (1,0), (0,1)}`.
///
/// Nodes are indexed by barycentric multi-indices `(α₀, α₁, α₂)`, `Σα = k`,
/// in descending lexicographic order; `λ₀ = 1 − ξ₁ − ξ₂`, `λ₁ = ξ₁`, `λ₂ = ξ₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceBasis {
    degree: usize,
    alphas: Vec<[usize; 3]>,
}

/// Values, reference gradients and reference Hessians of every basis
/// function at one point. Hessians are stored as `(∂₁₁, ∂₁₂, ∂₂₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

/// `dλ_m/dξ_a`
const DLAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

impl ReferenceBasis {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "Lagrange degree must be positive");
        let mut alphas = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
        for a0 in (0..=degree).rev() {
            for a1 in (0..=degree - a0).rev() {
                alphas.push([a0, a1, degree - a0 - a1]);
            }
        }
        Self { degree, alphas }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alpha(&self, i: usize) -> [usize; 3] {
        self.alphas[i]
    }

    pub fn alphas(&self) -> &[[usize; 3]] {
        &self.alphas
    }

    /// Reference coordinates of node `i`.
    pub fn node(&self, i: usize) -> [f64; 2] {
        let a = self.alphas[i];
        let k = self.degree as f64;
        [a[1] as f64 / k, a[2] as f64 / k]
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        let a = self.alphas[i];
        if let Some(v) = a.iter().position(|&x| x == self.degree) {
            return NodeKind::Vertex(v);
        }
        match a.iter().position(|&x| x == 0) {
            // the zero index is the vertex opposite the edge
            Some(opp) => NodeKind::Edge { edge: (opp + 1) % 3 },
            None => NodeKind::Interior,
        }
    }

    /// Univariate factor `Π_{j<a} (kλ − j)/(j+1)` with first and second derivatives.
    fn factor(&self, a: usize, lambda: f64) -> [f64; 3] {
        let k = self.degree as f64;
        let (mut p, mut dp, mut ddp) = (1.0, 0.0, 0.0);
        for j in 0..a {
            let inv = 1.0 / (j as f64 + 1.0);
            let q = (k * lambda - j as f64) * inv;
            let dq = k * inv;
            ddp = ddp * q + 2.0 * dp * dq;
            dp = dp * q + p * dq;
            p *= q;
        }
        [p, dp, ddp]
    }

    pub fn eval(&self, xi: [f64; 2]) -> BasisEval {
        let lambda = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let n = self.len();
        let mut out = BasisEval {
            values: Vec::with_capacity(n),
            grads: Vec::with_capacity(n),
            hessians: Vec::with_capacity(n),
        };
        for a in &self.alphas {
            let f = [
                self.factor(a[0], lambda[0]),
                self.factor(a[1], lambda[1]),
                self.factor(a[2], lambda[2]),
            ];
            let value = f[0][0] * f[1][0] * f[2][0];
            // derivatives with respect to barycentric coordinates
            let mut dl = [0.0; 3];
            let mut ddl = [[0.0; 3]; 3];
            for m in 0..3 {
                let (o1, o2) = ((m + 1) % 3, (m + 2) % 3);
                dl[m] = f[m][1] * f[o1][0] * f[o2][0];
                ddl[m][m] = f[m][2] * f[o1][0] * f[o2][0];
                ddl[m][o1] = f[m][1] * f[o1][1] * f[o2][0];
                ddl[o1][m] = ddl[m][o1];
            }
            let mut grad = [0.0; 2];
            let mut hess = [[0.0; 2]; 2];
            for m in 0..3 {
                for a_ in 0..2 {
                    grad[a_] += dl[m] * DLAMBDA[m][a_];
                }
                for l in 0..3 {
                    for a_ in 0..2 {
                        for b in 0..2 {
                            hess[a_][b] += ddl[m][l] * DLAMBDA[m][a_] * DLAMBDA[l][b];
                        }
                    }
                }
            }
            out.values.push(value);
            out.grads.push(grad);
            out.hessians.push([hess[0][0], hess[0][1], hess[1][1]]);
        }
        out
    }
}

impl BasisEval {
    /// `(ψ̂, ∇̂ψ̂, ∇̂²ψ̂)` of the combination `Σ cᵢ φ̂ᵢ`.
    pub fn combine(&self, coeffs: &[f64]) -> (f64, [f64; 2], [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (i, &c) in coeffs.iter().enumerate() {
            v += c * self.values[i];
            g[0] += c * self.grads[i][0];
            g[1] += c * self.grads[i][1];
            for (hh, bh) in h.iter_mut().zip(&self.hessians[i]) {
                *hh += c * bh;
            }
        }
        (v, g, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_nodal_property() {
        for k in 1..=5 {
            let b = ReferenceBasis::new(k);
            assert_eq!(b.len(), (k + 1) * (k + 2) / 2);
            for xi in [[0.1, 0.2], [0.7, 0.05], [0.0, 1.0], [1.0 / 3.0, 1.0 / 3.0]] {
                let e = b.eval(xi);
                let s: f64 = e.values.iter().sum();
                let g: [f64; 2] = e.grads.iter().fold([0.0; 2], |a, g| [a[0] + g[0], a[1] + g[1]]);
                let h: f64 = e.hessians.iter().map(|h| h[0].abs().max(h[1].abs())).sum::<f64>();
                let hs = e.hessians.iter().fold([0.0; 3], |a, h| [a[0] + h[0], a[1] + h[1], a[2] + h[2]]);
                assert!((s - 1.0).abs() < 1e-12);
                assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10);
                assert!(hs.iter().all(|v| v.abs() < 1e-9 * (1.0 + h)));
            }
            for i in 0..b.len() {
                let e = b.eval(b.node(i));
                for (j, v) in e.values.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "k={k} i={i} j={j} v={v}");
                }
            }
        }
    }

    #[test]
    fn quadratic_hessians_are_constant() {
        let b = ReferenceBasis::new(2);
        let h0 = b.eval([0.1, 0.3]).hessians;
        let h1 = b.eval([0.6, 0.2]).hessians;
        for (a, c) in h0.iter().zip(&h1) {
            for i in 0..3 {
                assert!((a[i] - c[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = ReferenceBasis::new(4);
        let xi = [0.23, 0.31];
        let e = b.eval(xi);
        let step = 1e-5;
        let ep = b.eval([xi[0] + step, xi[1]]);
        let em = b.eval([xi[0] - step, xi[1]]);
        let fp = b.eval([xi[0], xi[1] + step]);
        let fm = b.eval([xi[0], xi[1] - step]);
        for i in 0..b.len() {
            let d1 = (ep.values[i] - em.values[i]) / (2.0 * step);
            let d2 = (fp.values[i] - fm.values[i]) / (2.0 * step);
            assert!((d1 - e.grads[i][0]).abs() < 1e-7);
            assert!((d2 - e.grads[i][1]).abs() < 1e-7);
            let h11 = (ep.grads[i][0] - em.grads[i][0]) / (2.0 * step);
            let h12 = (fp.grads[i][0] - fm.grads[i][0]) / (2.0 * step);
            let h22 = (fp.grads[i][1] - fm.grads[i][1]) / (2.0 * step);
            assert!((h11 - e.hessians[i][0]).abs() < 1e-6);
            assert!((h12 - e.hessians[i][1]).abs() < 1e-6);
            assert!((h22 - e.hessians[i][2]).abs() < 1e-6);
        }
    }

    #[test]
    fn node_kinds() {
        let b = ReferenceBasis::new(3);
        let kinds: Vec<_> = (0..b.len()).map(|i| b.kind(i)).collect();
        assert_eq!(kinds.iter().filter(|k| matches!(k, NodeKind::Vertex(_))).count(), 3);
        assert_eq!(kinds.iter().filter(|k| matches!(k, NodeKind::Edge { .. })).count(), 6);
        assert_eq!(kinds.iter().filter(|k| matches!(k, NodeKind::Interior)).count(), 1);
        // (2,1,0) lies on the edge between local vertices 0 and 1
        let i = b.alphas().iter().position(|a| *a == [2, 1, 0]).unwrap();
        assert_eq!(b.kind(i), NodeKind::Edge { edge: 0 });
        let i = b.alphas().iter().position(|a| *a == [1, 0, 2]).unwrap();
        assert_eq!(b.kind(i), NodeKind::Edge { edge: 2 });
    }
}
