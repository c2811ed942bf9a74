use std::f64::consts::PI;

use proptest::prelude::*;

use surfstream::assembly::{assemble_system, AssemblyOptions};
use surfstream::fe_space::{edge_quadrature, triangle_quadrature, FeSpace, MAX_QUADRATURE_ORDER};
use surfstream::geometry::LevelSetSurface;
use surfstream::jets::FieldExpr;
use surfstream::linalg::{dense_eigen_min, dot, positive_on_complement, MeanProjector};
use surfstream::mesh::{BaseMesh, MappedMesh};
use surfstream::study::{run_convergence_study, DataChoice, StudyConfig, SurfaceChoice, Variant};
use surfstream::Vec3;

fn mapped(surface: LevelSetSurface, level: usize, kg: usize) -> MappedMesh {
    MappedMesh::new(BaseMesh::build(&surface, level).unwrap(), kg).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[test]
fn triangle_rules_integrate_monomials() {
    // ∫_T x^a y^b = a! b! / (a + b + 2)! on the unit reference triangle
    for order in 1..=MAX_QUADRATURE_ORDER {
        let rule = triangle_quadrature(order).unwrap();
        assert!(rule.exactness >= order);
        for a in 0..=order {
            for b in 0..=order - a {
                let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "order {order}: x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }
}

#[test]
fn edge_rules_integrate_monomials() {
    for order in 1..=MAX_QUADRATURE_ORDER {
        let rule = edge_quadrature(order).unwrap();
        for m in 0..=order {
            let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p.powi(m as i32)).sum();
            assert!((q - 1.0 / (m + 1) as f64).abs() < 1e-14, "order {order}, x^{m}");
        }
    }
}

#[test]
fn mesh_counts_follow_refinement() {
    for surface in [LevelSetSurface::unit_sphere(), LevelSetSurface::reference_ellipsoid()] {
        for level in 0..=4 {
            let m = BaseMesh::build(&surface, level).unwrap();
            let f = 8 * 4usize.pow(level as u32);
            assert_eq!(m.triangles.len(), f);
            assert_eq!(m.edges.len(), 3 * f / 2);
            assert_eq!(m.vertices.len(), f / 2 + 2);
            assert_eq!(m.euler_characteristic(), 2);
            for v in &m.vertices {
                assert!(surface.value(v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dof_counts_on_closed_surfaces() {
    let mesh = mapped(LevelSetSurface::reference_ellipsoid(), 2, 2);
    let (v, e, f) = (mesh.base.vertices.len(), mesh.base.edges.len(), mesh.base.triangles.len());
    for k in 2..=4 {
        let space = FeSpace::new(&mesh, k).unwrap();
        assert_eq!(space.n_dofs(), v + e * (k - 1) + f * (k - 1) * (k - 2) / 2, "k = {k}");
    }
}

#[test]
fn mapped_sphere_area_converges() {
    // area error of a degree-kg interpolant of the sphere is O(h^(kg+1))
    for kg in 1..=3 {
        let errs: Vec<f64> = (1..=3)
            .map(|l| {
                let mesh = mapped(LevelSetSurface::unit_sphere(), l, kg);
                let sys = assemble_system(&mesh, 2, &AssemblyOptions::default()).unwrap();
                (sys.area() - 4.0 * PI).abs()
            })
            .collect();
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "kg = {kg}: {errs:?}");
        assert!(errs[1] / errs[2] > 2f64.powi(kg as i32 + 1) * 0.7, "kg = {kg}: {errs:?}");
    }
}

#[test]
fn assembled_matrix_is_exactly_symmetric() {
    let surface = LevelSetSurface::reference_ellipsoid();
    for kg in 1..=3 {
        for k in 2..=4 {
            let sys = assemble_system(&mapped(surface, 1, kg), k, &AssemblyOptions::default()).unwrap();
            assert_eq!(sys.matrix.max_asymmetry(), 0.0, "k = {k}, kg = {kg}");
            assert_eq!(sys.base.max_asymmetry(), 0.0);
            assert_eq!(sys.penalty.max_asymmetry(), 0.0);
        }
    }
}

#[test]
fn penalty_enters_linearly() {
    let sys = assemble_system(&mapped(LevelSetSurface::reference_ellipsoid(), 1, 2), 3, &AssemblyOptions::default()).unwrap();
    let (s1, s2) = (7.0, 130.0);
    let a1 = sys.matrix_with_penalty(s1).to_dense();
    let a2 = sys.matrix_with_penalty(s2).to_dense();
    let mid = sys.matrix_with_penalty(0.5 * (s1 + s2)).to_dense();
    let gap = (0.5 * (a1 + a2) - mid).abs().max();
    assert!(gap < 1e-12 * sys.matrix.max_abs(), "{gap}");
    let own = (sys.matrix_with_penalty(sys.sigma).to_dense() - sys.matrix.to_dense()).abs().max();
    assert!(own < 1e-12 * sys.matrix.max_abs());
}

#[test]
fn coercivity_grows_with_penalty() {
    // the penalty part is positive semidefinite, so λ_min is nondecreasing in σ
    let sys = assemble_system(&mapped(LevelSetSurface::reference_ellipsoid(), 1, 2), 2, &AssemblyOptions::default()).unwrap();
    let lambdas: Vec<f64> = [10.0, 40.0, 400.0, 4000.0]
        .iter()
        .map(|&s| dense_eigen_min(&sys.matrix_with_penalty(s), &sys.mean).unwrap())
        .collect();
    for w in lambdas.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-10), "{lambdas:?}");
    }
}

#[test]
fn pinned_factorization_detects_indefiniteness() {
    for k in [2, 3] {
        let sys = assemble_system(&mapped(LevelSetSurface::unit_sphere(), 1, 2), k, &AssemblyOptions::default()).unwrap();
        assert!(positive_on_complement(&sys.matrix, &sys.mean).unwrap());
        let flipped = sys.matrix_with_penalty(-sys.sigma);
        assert!(!positive_on_complement(&flipped, &sys.mean).unwrap());
        assert!(dense_eigen_min(&flipped, &sys.mean).unwrap() < 0.0);
    }
}

#[test]
fn killing_stream_velocity_converges() {
    // φ = x3 on the sphere is a rotation: H(φ) = 0, f = 0 apart from the
    // geometric consistency error, so velocity converges at least at order 2
    let config = StudyConfig {
        surface: SurfaceChoice::Sphere,
        data: DataChoice::Rotation,
        levels: vec![1, 2, 3],
        variants: vec![Variant::VelPiola, Variant::StreamTilde],
        ..StudyConfig::default()
    };
    let report = run_convergence_study(&config).unwrap();
    for r in report.rates(Variant::VelPiola) {
        assert!(r.unwrap() >= 2.0, "{:?}", report.rates(Variant::VelPiola));
    }
}

fn jet_oracle(x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    // f = sin(x0) e^{x1} + x0 x2²
    let (s, c, e) = (x[0].sin(), x[0].cos(), x[1].exp());
    let f = s * e + x[0] * x[2] * x[2];
    let g = [c * e + x[2] * x[2], s * e, 2.0 * x[0] * x[2]];
    let h = [[-s * e, c * e, 2.0 * x[2]], [c * e, s * e, 0.0], [2.0 * x[2], 0.0, 2.0 * x[0]]];
    (f, g, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_match_closed_form(x0 in -2.0..2.0f64, x1 in -2.0..2.0f64, x2 in -2.0..2.0f64) {
        let expr = FieldExpr::x(0).sin() * FieldExpr::x(1).exp() + FieldExpr::x(0) * FieldExpr::x(2) * FieldExpr::x(2);
        let x = [x0, x1, x2];
        let j = expr.jet(x).unwrap();
        let (f, g, h) = jet_oracle(x);
        let scale = 1.0 + f.abs();
        prop_assert!((j.value - f).abs() < 1e-13 * scale);
        for i in 0..3 {
            prop_assert!((j.grad[i] - g[i]).abs() < 1e-12 * scale);
            for k in 0..3 {
                prop_assert!((j.hess(i, k) - h[i][k]).abs() < 1e-12 * scale);
            }
        }
        let e = x1.exp();
        prop_assert!((j.third(0, 0, 0) + x0.cos() * e).abs() < 1e-12 * scale);
        prop_assert!((j.third(0, 2, 2) - 2.0).abs() < 1e-12 * scale);
        prop_assert!((j.third(0, 1, 1) - x0.cos() * e).abs() < 1e-12 * scale);
    }

    #[test]
    fn constants_lie_in_the_kernel(shift in -1e3..1e3f64, seed in 0u64..1000) {
        let mesh = mapped(LevelSetSurface::reference_ellipsoid(), 1, 2);
        let sys = assemble_system(&mesh, 2, &AssemblyOptions::default()).unwrap();
        let n = sys.n_dofs();
        let x: Vec<f64> = (0..n).map(|i| (((i as u64 + 1) * (seed + 7)) % 97) as f64 / 97.0 - 0.5).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let ax = sys.matrix.matvec(&x).unwrap();
        let axs = sys.matrix.matvec(&shifted).unwrap();
        let scale = sys.matrix.max_abs() * (1.0 + shift.abs());
        for (a, b) in ax.iter().zip(&axs) {
            prop_assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn mean_projection_is_idempotent(v in prop::collection::vec(-10.0..10.0f64, 12), c in prop::collection::vec(0.1..2.0f64, 12)) {
        let p = MeanProjector::new(&c).unwrap();
        let once = p.project(&v);
        let twice = p.project(&once);
        prop_assert!(dot(&c, &once).abs() < 1e-12 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()));
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn interpolated_constant_has_area_integral(value in -5.0..5.0f64) {
        let mesh = mapped(LevelSetSurface::unit_sphere(), 1, 3);
        let space = FeSpace::new(&mesh, 2).unwrap();
        let coeffs = space.interpolate(&mesh, |_: &Vec3| Ok(value)).unwrap();
        let sys = assemble_system(&mesh, 2, &AssemblyOptions::default()).unwrap();
        let integral = dot(&sys.mean, &coeffs);
        prop_assert!((integral - value * sys.area()).abs() < 1e-12 * (1.0 + value.abs()));
    }
}
