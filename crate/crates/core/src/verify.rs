//! Verification suites run by `surfstream verify`: operator identities on the
//! discrete surface, algebraic properties of the assembled system,
//! continuous identities, and geometric approximation orders.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analysis::{fitted_order, geometric_fidelity, observed_orders, verify_global_ibp, verify_hessian_identities};
use crate::assembly::{assemble_system, manufactured_rhs, AssemblyOptions, ManufacturedProblem};
use crate::error::{Error, Result};
use crate::fe_space::{triangle_quadrature, FeSpace, ReferenceBasis};
use crate::jets::FieldExpr;
use crate::linalg::{positive_on_complement, dense_bordered_solve, dense_eigen_min, dot, norm, solve_mean_zero, DENSE_MAX};
use crate::mesh::{BaseMesh, MappedMesh};
use crate::study::SurfaceChoice;
use crate::surface_ops::GeometryFrame;
use crate::Vec3;

/// `∫_{S²} x₁²x₂² = 4π/15`.
pub const SPHERE_X1X2_MOMENT: f64 = 4.0 * PI / 15.0;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub surface: SurfaceChoice,
    pub level: usize,
    pub k: usize,
    pub kg: usize,
    pub sigma: Option<f64>,
    pub flip_penalty_sign: bool,
    /// Levels for the geometric and identity convergence orders.
    pub order_levels: Vec<usize>,
    pub random_fields: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceChoice::Sphere,
            level: 2,
            k: 2,
            kg: 2,
            sigma: None,
            flip_penalty_sign: false,
            order_levels: vec![1, 2, 3],
            random_fields: 20,
            seed: 20240917,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Pass when `value ≤ threshold` (or `≥` when `lower_bound`).
    pub threshold: f64,
    pub lower_bound: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            lower_bound: false,
            passed: value <= threshold,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            lower_bound: true,
            passed: value > threshold,
        }
    }

    /// `|value − target| ≤ tol`, stored as the deviation.
    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let mut c = Self::at_most(name, (value - target).abs(), tol);
        c.passed &= value.is_finite();
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &'static str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { name, checks, passed }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        let c = &self.config;
        let suites: Vec<_> = self
            .suites
            .iter()
            .map(|s| {
                let checks: Vec<_> = s
                    .checks
                    .iter()
                    .map(|k| {
                        json!({
                            "name": k.name,
                            "value": k.value,
                            "threshold": k.threshold,
                            "kind": if k.lower_bound { "greater_than" } else { "at_most" },
                            "passed": k.passed,
                        })
                    })
                    .collect();
                json!({ "name": s.name, "passed": s.passed, "checks": checks })
            })
            .collect();
        let v = json!({
            "passed": self.passed(),
            "config": {
                "surface": match c.surface { SurfaceChoice::Sphere => "sphere", SurfaceChoice::Ellipsoid => "ellipsoid" },
                "level": c.level,
                "k": c.k,
                "kg": c.kg,
                "sigma": c.sigma,
                "flip_penalty_sign": c.flip_penalty_sign,
            },
            "suites": suites,
        });
        serde_json::to_string_pretty(&v).expect("plain JSON values")
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Maxima of the discrete operator residuals over every quadrature point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OperatorResiduals {
    /// `‖M − Mᵀ‖ / ‖M‖` for the projected Hessian `M`.
    pub hessian_symmetry: f64,
    /// `|tr H| / ‖H‖`
    pub hess_like_trace: f64,
    /// `‖H − E(curl)‖ / ‖H‖`
    pub hess_like_equiv: f64,
    /// Relative mismatch of `DFᵀ∇ψ` against central differences of `ψ̂`.
    pub gradient_fd: f64,
    /// `|n·∇ψ| / |∇ψ|`
    pub gradient_normal: f64,
}

/// Evaluate the discrete operators for `fields` random fields at every
/// quadrature point of `mesh`.
pub fn operator_residuals(mesh: &MappedMesh, k: usize, fields: usize, seed: u64) -> Result<OperatorResiduals> {
    let space = FeSpace::new(mesh, k)?;
    let rule = triangle_quadrature(2 * k + 2)?;
    let geo = ReferenceBasis::new(mesh.kg());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = OperatorResiduals::default();
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    for _ in 0..fields {
        let coeffs = random_field(&mut rng, space.n_dofs());
        for t in 0..mesh.n_elements() {
            let nodes = mesh.element_nodes(t);
            let local: Vec<f64> = space.dofs.element_dofs(t).iter().map(|&g| coeffs[g]).collect();
            for xi in &rule.points {
                let frame = GeometryFrame::from_nodes(&nodes, &geo.eval(*xi), mesh.h_per_element[t], t)?;
                let (_, g, h) = space.basis.eval(*xi).combine(&local);
                let m = frame.hessian_from_ref(g, h);
                r.hessian_symmetry = r.hessian_symmetry.max(rel((m - m.transpose()).norm(), m.norm()));
                let hl = frame.hess_like_from_hessian(&m);
                r.hess_like_trace = r.hess_like_trace.max(rel(hl.trace().abs(), hl.norm()));
                let e = frame.deformation_of_curl_from_ref(g, h);
                r.hess_like_equiv = r.hess_like_equiv.max(rel((e - hl).norm(), hl.norm()));

                let grad = frame.gradient_from_ref(g);
                r.gradient_normal = r.gradient_normal.max(rel(grad.dot(&frame.normal).abs(), grad.norm()));
                let delta = 1e-6;
                for a in 0..2 {
                    let mut p = *xi;
                    let mut m_ = *xi;
                    p[a] += delta;
                    m_[a] -= delta;
                    let fd = (space.basis.eval(p).combine(&local).0 - space.basis.eval(m_).combine(&local).0) / (2.0 * delta);
                    let tangent: Vec3 = frame.df.column(a).into_owned();
                    let exact = tangent.dot(&grad);
                    let scale = grad.norm() * tangent.norm();
                    r.gradient_fd = r.gradient_fd.max(rel((fd - exact).abs(), scale));
                }
            }
        }
    }
    Ok(r)
}

fn mesh_for(surface: SurfaceChoice, level: usize, kg: usize) -> Result<MappedMesh> {
    MappedMesh::new(BaseMesh::build(&surface.surface(), level)?, kg)
}

fn operator_suites(c: &VerifyConfig, mesh: &MappedMesh) -> Result<[SuiteResult; 2]> {
    let r = operator_residuals(mesh, c.k, c.random_fields, c.seed)?;
    let symmetry_ops = vec![Check::at_most("surface_hessian_symmetry", r.hessian_symmetry, 1e-13)];
    let trace = vec![
        Check::at_most("hess_like_trace", r.hess_like_trace, 1e-12),
        Check::at_most("hess_like_equiv", r.hess_like_equiv, 1e-10),
        Check::at_most("surface_gradient_fd", r.gradient_fd, 1e-6),
        Check::at_most("surface_gradient_normal", r.gradient_normal, 1e-12),
    ];
    Ok([SuiteResult::new("symmetry", symmetry_ops), SuiteResult::new("trace_free", trace)])
}

fn algebra_suites(c: &VerifyConfig, mesh: &MappedMesh) -> Result<[SuiteResult; 2]> {
    let opts = AssemblyOptions {
        sigma: c.sigma,
        quad_order: None,
    };
    let sys = assemble_system(mesh, c.k, &opts)?;
    let a = if c.flip_penalty_sign {
        sys.matrix_with_penalty(-sys.sigma)
    } else {
        sys.matrix.clone()
    };
    let n = a.n();
    let ones = a.matvec(&vec![1.0; n])?;
    let a_max = a.max_abs();
    let kernel = ones.iter().fold(0.0f64, |m, v| m.max(v.abs())) / a_max;
    let symmetry = vec![Check::at_most("matrix_asymmetry", a.max_asymmetry(), 0.0)];
    let mut coercive = vec![Check::at_most("constant_kernel", kernel, 1e-12)];
    if n <= DENSE_MAX {
        let lambda = dense_eigen_min(&a, &sys.mean)?;
        coercive.push(Check::above("min_eigenvalue_on_mean_zero", lambda, 0.0));
    } else {
        let ok = positive_on_complement(&a, &sys.mean)?;
        coercive.push(Check::above("pinned_cholesky_exists", if ok { 1.0 } else { 0.0 }, 0.0));
    }
    Ok([SuiteResult::new("symmetry", symmetry), SuiteResult::new("coercivity", coercive)])
}

/// Iterative solution against the dense bordered system on a small mesh.
fn solver_suite(c: &VerifyConfig) -> Result<SuiteResult> {
    let level = c.level.min(1);
    let mesh = mesh_for(c.surface, level, c.kg)?;
    let sys = assemble_system(&mesh, c.k, &AssemblyOptions { sigma: c.sigma, quad_order: None })?;
    let problem = ManufacturedProblem::smooth_on(c.surface.surface());
    let rhs = manufactured_rhs(&mesh, &sys, &problem)?;
    let mut checks = Vec::new();
    if sys.n_dofs() > DENSE_MAX {
        checks.push(Check::at_most("dense_size", sys.n_dofs() as f64, DENSE_MAX as f64));
        return Ok(SuiteResult::new("solver", checks));
    }
    let cg = match solve_mean_zero(&sys.matrix, &sys.mean, &rhs, 1e-12, 20 * sys.n_dofs()) {
        Ok(r) => r,
        Err(Error::NonConvergence { residual, .. }) => {
            checks.push(Check::at_most("cg_converged", residual, 1e-12));
            return Ok(SuiteResult::new("solver", checks));
        }
        Err(e) => return Err(e),
    };
    let (dense, _) = dense_bordered_solve(&sys.matrix, &sys.mean, &rhs)?;
    let diff: Vec<f64> = cg.x.iter().zip(&dense).map(|(a, b)| a - b).collect();
    // the dense LU reference itself is only accurate to about κε
    let lambda_max = (0..sys.n_dofs())
        .map(|i| sys.matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let kappa = lambda_max / dense_eigen_min(&sys.matrix, &sys.mean)?.max(f64::MIN_POSITIVE);
    let tol = 1e-8f64.max(10.0 * kappa * f64::EPSILON);
    checks.push(Check::at_most("cg_vs_dense", norm(&diff) / norm(&dense), tol));
    checks.push(Check::at_most(
        "mean_constraint",
        dot(&sys.mean, &cg.x).abs() / (norm(&sys.mean) * norm(&cg.x)),
        1e-10,
    ));
    let monotone = cg.energy.windows(2).all(|w| w[1] <= w[0]);
    checks.push(Check::at_most("energy_increase_steps", if monotone { 0.0 } else { 1.0 }, 0.0));
    Ok(SuiteResult::new("solver", checks))
}

fn identity_suite(c: &VerifyConfig) -> Result<SuiteResult> {
    let q = 2 * c.kg.max(c.k) + 4;
    let x1x2 = FieldExpr::x(0) * FieldExpr::x(1);
    let target = 12.0 * SPHERE_X1X2_MOMENT;
    let r = verify_global_ibp(&x1x2, &x1x2, c.level, c.kg, q)?;
    let rot = verify_global_ibp(&FieldExpr::x(2), &FieldExpr::x(2), c.level, c.kg, q)?;
    // residuals are pure geometry error, O(h^(kg+1))
    let h = mesh_for(SurfaceChoice::Sphere, c.level, c.kg)?.mesh_size().0;
    let tol = h.powi(c.kg as i32 + 1);
    let mut checks = vec![
        Check::at_most("ibp_x1x2_residual", r.residual, tol),
        Check::at_most("hess_like_x1x2_relative", (r.hess_like_product - target).abs() / target, tol),
        Check::at_most("hess_like_x3_integral", rot.hess_like_product.abs(), 1e-8),
        Check::at_most("ibp_x3_residual", rot.residual, tol),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let surface = c.surface.surface();
    let points: Vec<Vec3> = (0..50)
        .map(|_| {
            let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let d = if d.norm() < 1e-3 { Vec3::x() } else { d };
            let a = surface.semi_axes();
            let u = d.normalize();
            // radial scaling onto the quadric is exact
            let s = 1.0 / (u[0] * u[0] / (a[0] * a[0]) + u[1] * u[1] / (a[1] * a[1]) + u[2] * u[2] / (a[2] * a[2])).sqrt();
            s * u
        })
        .collect();
    for (name, expr) in [
        ("hessian_identity_x3", FieldExpr::x(2)),
        ("hessian_identity_smooth", FieldExpr::exp_cos_stream()),
    ] {
        let h = verify_hessian_identities(&surface, &expr, &points)?;
        checks.push(Check::at_most(name, h.max(), 1e-8));
    }
    Ok(SuiteResult::new("identity", checks))
}

/// Observed orders of `max|d̃|` and `max|ñ − n_h|` across `levels`.
/// Pairwise and fitted orders of the distance and normal errors of the mapped
/// mesh over a level sequence.
pub struct FidelityOrders {
    pub distance: Vec<Option<f64>>,
    pub normal: Vec<Option<f64>>,
    pub distance_fit: Option<f64>,
    pub normal_fit: Option<f64>,
}

pub fn fidelity_orders(surface: SurfaceChoice, kg: usize, levels: &[usize]) -> Result<FidelityOrders> {
    let mut hs = Vec::new();
    let mut dist = Vec::new();
    let mut normal = Vec::new();
    for &l in levels {
        let mesh = mesh_for(surface, l, kg)?;
        let g = geometric_fidelity(&mesh, 2 * kg + 4)?;
        hs.push(mesh.mesh_size().0);
        dist.push(g.distance);
        normal.push(g.normal);
    }
    Ok(FidelityOrders {
        distance: observed_orders(&dist, &hs),
        normal: observed_orders(&normal, &hs),
        distance_fit: fitted_order(&dist, &hs),
        normal_fit: fitted_order(&normal, &hs),
    })
}

// Always on the ellipsoid: the sphere superconverges for even kg.
fn fidelity_suite(c: &VerifyConfig) -> Result<SuiteResult> {
    let o = fidelity_orders(SurfaceChoice::Ellipsoid, c.kg, &c.order_levels)?;
    let kg = c.kg as f64;
    let checks = vec![
        Check::near("distance_order", o.distance_fit.unwrap_or(f64::NAN), kg + 1.0, 0.5),
        Check::near("normal_order", o.normal_fit.unwrap_or(f64::NAN), kg, 0.5),
    ];
    Ok(SuiteResult::new("geometric_fidelity", checks))
}

/// Run every suite. Checks with the same suite name are merged.
pub fn run_verification(c: &VerifyConfig) -> Result<VerificationReport> {
    let mesh = mesh_for(c.surface, c.level, c.kg)?;
    let [sym_ops, trace] = operator_suites(c, &mesh)?;
    let [sym_alg, coercive] = algebra_suites(c, &mesh)?;
    let mut symmetry_checks = sym_alg.checks;
    symmetry_checks.extend(sym_ops.checks);
    let suites = vec![
        identity_suite(c)?,
        SuiteResult::new("symmetry", symmetry_checks),
        coercive,
        trace,
        solver_suite(c)?,
        fidelity_suite(c)?,
    ];
    Ok(VerificationReport { config: c.clone(), suites })
}
