//! Convergence-study driver and table output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use crate::analysis::{
    observed_orders, stream_error, velocity_error, ErrorRecord, StreamVariant, VelocityVariant, ERROR_QUAD_BOOST,
};
use crate::assembly::{assemble_system, manufactured_rhs, AssemblyOptions, ManufacturedProblem};
use crate::error::{Error, Result};
use crate::geometry::LevelSetSurface;
use crate::jets::FieldExpr;
use crate::linalg::{solve_mean_zero_with, Preconditioner, SolverOptions, DEFAULT_REL_TOL};
use crate::mesh::{BaseMesh, MappedMesh};

pub const DEFAULT_MAX_ITER: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceChoice {
    Ellipsoid,
    Sphere,
}

impl SurfaceChoice {
    pub fn surface(self) -> LevelSetSurface {
        match self {
            SurfaceChoice::Ellipsoid => LevelSetSurface::reference_ellipsoid(),
            SurfaceChoice::Sphere => LevelSetSurface::unit_sphere(),
        }
    }
}

/// Manufactured data set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataChoice {
    /// `φ = e^{x₁}(cos x₂ + x₃)`, `p = x₁x₂x₃`.
    Smooth,
    /// `φ = x₃`, `p = 0`; a rigid rotation on the sphere.
    Rotation,
}

impl DataChoice {
    pub fn problem(self, surface: LevelSetSurface) -> ManufacturedProblem {
        match self {
            DataChoice::Smooth => ManufacturedProblem::smooth_on(surface),
            DataChoice::Rotation => ManufacturedProblem {
                name: "rotation",
                surface,
                stream: FieldExpr::x(2),
                pressure: FieldExpr::c(0.0),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    StreamTilde,
    StreamCe,
    VelPiola,
    VelCe,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::StreamTilde, Variant::StreamCe, Variant::VelPiola, Variant::VelCe];

    pub fn column(self) -> &'static str {
        match self {
            Variant::StreamTilde => "err_stream_tilde",
            Variant::StreamCe => "err_stream_ce",
            Variant::VelPiola => "err_vel_piola",
            Variant::VelCe => "err_vel_ce",
        }
    }

    pub fn of(self, r: &ErrorRecord) -> f64 {
        match self {
            Variant::StreamTilde => r.err_stream_tilde,
            Variant::StreamCe => r.err_stream_ce,
            Variant::VelPiola => r.err_vel_piola,
            Variant::VelCe => r.err_vel_ce,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub surface: SurfaceChoice,
    pub data: DataChoice,
    pub k: usize,
    pub kg: usize,
    pub levels: Vec<usize>,
    pub sigma: Option<f64>,
    pub quad_order: Option<usize>,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    pub variants: Vec<Variant>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Record wall time in the `seconds` column; off keeps output reproducible.
    pub timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceChoice::Ellipsoid,
            data: DataChoice::Smooth,
            k: 2,
            kg: 2,
            levels: vec![1, 2, 3, 4],
            sigma: None,
            quad_order: None,
            solver_tol: DEFAULT_REL_TOL,
            max_iter: DEFAULT_MAX_ITER,
            preconditioner: Preconditioner::PinnedCholesky,
            variants: Variant::ALL.to_vec(),
            out: None,
            format: OutputFormat::Csv,
            timing: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.k) {
            return Err(Error::InvalidInput(format!("k must be in 2..=4, got {}", self.k)));
        }
        if !(1..=4).contains(&self.kg) {
            return Err(Error::InvalidInput(format!("kg must be in 1..=4, got {}", self.kg)));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("levels must not be empty".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerance must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidInput("at least one error variant is required".into()));
        }
        Ok(())
    }
}

/// Parse `a..b` (inclusive) or a comma-separated list.
pub fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidInput(format!("cannot parse levels '{s}'"));
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub records: Vec<ErrorRecord>,
}

impl ConvergenceReport {
    pub fn hs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h).collect()
    }

    pub fn errors(&self, v: Variant) -> Vec<f64> {
        self.records.iter().map(|r| v.of(r)).collect()
    }

    /// Observed orders between consecutive levels.
    pub fn rates(&self, v: Variant) -> Vec<Option<f64>> {
        observed_orders(&self.errors(v), &self.hs())
    }

    fn cell(&self, v: Variant, value: f64) -> Option<f64> {
        self.config.variants.contains(&v).then_some(value)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["level", "h", "ndof"];
        for v in Variant::ALL {
            header.push(v.column());
            header.push("rate");
        }
        header.extend(["iters", "seconds"]);
        w.write_record(&header)?;
        let rates: Vec<Vec<Option<f64>>> = Variant::ALL.iter().map(|v| self.rates(*v)).collect();
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![r.level.to_string(), sci(r.h), r.ndof.to_string()];
            for (vi, v) in Variant::ALL.iter().enumerate() {
                match self.cell(*v, v.of(r)) {
                    Some(e) => {
                        row.push(sci(e));
                        row.push(if i == 0 { String::new() } else { rate_text(rates[vi][i - 1]) });
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row.push(r.iterations.to_string());
            row.push(if self.config.timing { sci(r.seconds) } else { String::new() });
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "k = {}, k_g = {}, sigma = {}", c.k, c.kg, fmt_sigma(c));
        let _ = writeln!(s);
        let mut head = vec!["level".to_string(), "h".into(), "ndof".into()];
        for v in Variant::ALL.iter().filter(|v| c.variants.contains(v)) {
            head.push(v.column().into());
            head.push("rate".into());
        }
        head.push("iters".into());
        if c.timing {
            head.push("seconds".into());
        }
        let _ = writeln!(s, "| {} |", head.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(head.len()));
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![r.level.to_string(), format!("{:.5e}", r.h), r.ndof.to_string()];
            for v in Variant::ALL.iter().filter(|v| c.variants.contains(v)) {
                row.push(format!("{:.5e}", v.of(r)));
                row.push(if i == 0 {
                    "-".into()
                } else {
                    match self.rates(*v)[i - 1] {
                        Some(x) => format!("{x:.3}"),
                        None => "-".into(),
                    }
                });
            }
            row.push(r.iterations.to_string());
            if c.timing {
                row.push(format!("{:.2}", r.seconds));
            }
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        s
    }

    pub fn render(&self) -> Result<Vec<u8>> {
        match self.config.format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Markdown => Ok(self.to_markdown().into_bytes()),
        }
    }

    /// Write the report to the configured path, if any.
    pub fn write(&self) -> Result<()> {
        if let Some(path) = &self.config.out {
            let bytes = self.render()?;
            let mut f = std::fs::File::create(path)?;
            f.write_all(&bytes)?;
        }
        Ok(())
    }
}

fn fmt_sigma(c: &StudyConfig) -> String {
    match c.sigma {
        Some(s) => format!("{s}"),
        None => format!("{}", crate::assembly::default_sigma(c.k)),
    }
}

fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

fn rate_text(r: Option<f64>) -> String {
    match r {
        Some(x) => sci(x),
        None => "nan".into(),
    }
}

/// Solve and measure one level.
pub fn run_level(config: &StudyConfig, problem: &ManufacturedProblem, level: usize) -> Result<ErrorRecord> {
    let start = Instant::now();
    let mesh = MappedMesh::new(BaseMesh::build(&problem.surface, level)?, config.kg)?;
    let opts = AssemblyOptions {
        sigma: config.sigma,
        quad_order: config.quad_order,
    };
    let sys = assemble_system(&mesh, config.k, &opts)?;
    let rhs = manufactured_rhs(&mesh, &sys, problem)?;
    let solver = SolverOptions {
        rel_tol: config.solver_tol,
        max_iter: config.max_iter,
        preconditioner: config.preconditioner,
    };
    let sol = solve_mean_zero_with(&sys.matrix, &sys.mean, &rhs, &solver)?;
    let q = sys.quad_order + ERROR_QUAD_BOOST;
    let want = |v: Variant| config.variants.contains(&v);
    let space = &sys.space;
    let x = &sol.x;
    let measure = |v: Variant| -> Result<f64> {
        if !want(v) {
            return Ok(f64::NAN);
        }
        match v {
            Variant::StreamTilde => stream_error(&mesh, space, x, problem, StreamVariant::Tilde, q),
            Variant::StreamCe => stream_error(&mesh, space, x, problem, StreamVariant::Ce, q),
            Variant::VelPiola => velocity_error(&mesh, space, x, problem, VelocityVariant::Piola, q),
            Variant::VelCe => velocity_error(&mesh, space, x, problem, VelocityVariant::Ce, q),
        }
    };
    Ok(ErrorRecord {
        level,
        h: mesh.mesh_size().0,
        ndof: sys.n_dofs(),
        err_stream_tilde: measure(Variant::StreamTilde)?,
        err_stream_ce: measure(Variant::StreamCe)?,
        err_vel_piola: measure(Variant::VelPiola)?,
        err_vel_ce: measure(Variant::VelCe)?,
        iterations: sol.iterations,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Failure part-way through a study, with the levels that completed.
#[derive(Debug)]
pub struct StudyFailure {
    pub partial: ConvergenceReport,
    pub error: Error,
}

/// Run every level, writing the output file when configured. On failure the
/// completed rows are still written before the error is returned.
pub fn run_convergence_study_with<P>(config: &StudyConfig, mut progress: P) -> std::result::Result<ConvergenceReport, StudyFailure>
where
    P: FnMut(&ErrorRecord),
{
    let fail = |records: Vec<ErrorRecord>, error: Error| StudyFailure {
        partial: ConvergenceReport {
            config: config.clone(),
            records,
        },
        error,
    };
    if let Err(e) = config.validate() {
        return Err(fail(Vec::new(), e));
    }
    let problem = config.data.problem(config.surface.surface());
    let mut records = Vec::new();
    for &level in &config.levels {
        match run_level(config, &problem, level) {
            Ok(r) => {
                progress(&r);
                records.push(r);
            }
            Err(e) => {
                let failure = fail(records, e);
                if !failure.partial.records.is_empty() {
                    let _ = failure.partial.write();
                }
                return Err(failure);
            }
        }
    }
    let report = ConvergenceReport {
        config: config.clone(),
        records,
    };
    report.write().map_err(|e| fail(report.records.clone(), e))?;
    Ok(report)
}

pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    run_convergence_study_with(config, |_| {}).map_err(|f| f.error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!(parse_levels("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_levels("0,2").unwrap(), vec![0, 2]);
        assert!(parse_levels("").unwrap().is_empty());
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = StudyConfig::default();
        assert!(c.validate().is_ok());
        c.levels.clear();
        assert!(c.validate().is_err());
        c.levels = vec![2, 1];
        assert!(c.validate().is_err());
        c = StudyConfig { k: 5, ..Default::default() };
        assert!(c.validate().is_err());
        c = StudyConfig { kg: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
