use crate::error::{Error, Result};

/// Highest polynomial exactness offered for both triangle and edge rules.
pub const MAX_QUADRATURE_ORDER: usize = 40;

/// Rule on the reference triangle; weights sum to its area `1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Rule on `[0, 1]`; weights sum to `1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n`-point Gauss–Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = 0.5 * (1.0 - x);
        xs[n - 1 - i] = 0.5 * (1.0 + x);
        ws[i] = 0.5 * w;
        ws[n - 1 - i] = 0.5 * w;
    }
    (xs, ws)
}

pub fn edge_quadrature(order: usize) -> Result<EdgeRule> {
    if order > MAX_QUADRATURE_ORDER {
        return Err(Error::UnsupportedQuadrature {
            requested: order,
            max: MAX_QUADRATURE_ORDER,
        });
    }
    let n = order / 2 + 1;
    let (points, weights) = gauss_legendre(n);
    Ok(EdgeRule {
        points,
        weights,
        exactness: 2 * n - 1,
    })
}

/// Collapsed (Duffy) tensor Gauss rule, exact for total degree `order`.
pub fn triangle_quadrature(order: usize) -> Result<TriangleRule> {
    if order > MAX_QUADRATURE_ORDER {
        return Err(Error::UnsupportedQuadrature {
            requested: order,
            max: MAX_QUADRATURE_ORDER,
        });
    }
    let n = (order + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            points.push([*u, (1.0 - u) * v]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exactness: 2 * n - 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫_T̂ ξ₁^a ξ₂^b = a! b! / (a + b + 2)!`
    fn monomial_integral(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact_on_monomials() {
        for order in 0..=MAX_QUADRATURE_ORDER {
            let r = triangle_quadrature(order).unwrap();
            assert!(r.exactness >= order);
            assert!(r.weights.iter().all(|w| *w > 0.0));
            assert!(r.points.iter().all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0));
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!((q - exact).abs() <= 1e-13 * exact.max(1e-3), "order {order} a {a} b {b}");
                }
            }
        }
    }

    #[test]
    fn unit_and_bilinear_moments() {
        for order in [0, 2, 5, 10, 20] {
            let r = triangle_quadrature(order).unwrap();
            let area: f64 = r.weights.iter().sum();
            assert!((area - 0.5).abs() < 1e-15);
            if order >= 2 {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[1]).sum();
                assert!((q - 1.0 / 24.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn edge_rules_are_exact() {
        let r = edge_quadrature(4).unwrap();
        assert_eq!(r.len(), 3);
        let q: f64 = r.points.iter().zip(&r.weights).map(|(s, w)| w * s.powi(4)).sum();
        assert!((q - 0.2).abs() < 1e-15);
        for order in 0..=MAX_QUADRATURE_ORDER {
            let r = edge_quadrature(order).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..=order as i32 {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(s, w)| w * s.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "order {order} p {p}");
            }
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            triangle_quadrature(MAX_QUADRATURE_ORDER + 1),
            Err(Error::UnsupportedQuadrature { .. })
        ));
        assert!(edge_quadrature(MAX_QUADRATURE_ORDER + 1).is_err());
    }
}
