use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use surfstream::study::{
    parse_levels, run_convergence_study_with, DataChoice, OutputFormat, StudyConfig, SurfaceChoice, Variant,
    DEFAULT_MAX_ITER,
};
use surfstream::linalg::Preconditioner;
use surfstream::verify::{run_verification, VerifyConfig};

#[derive(Parser)]
#[command(name = "surfstream", version, about = "Stream-function surface Stokes convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a sequence of refinement levels and tabulate errors and observed orders.
    Study(StudyArgs),
    /// Run the operator, algebra, identity and geometry verification suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Ellipsoid,
    Sphere,
}

impl From<SurfaceArg> for SurfaceChoice {
    fn from(s: SurfaceArg) -> Self {
        match s {
            SurfaceArg::Ellipsoid => SurfaceChoice::Ellipsoid,
            SurfaceArg::Sphere => SurfaceChoice::Sphere,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DataArg {
    /// φ = exp(x1)(cos x2 + x3), p = x1 x2 x3
    Smooth,
    /// φ = x3, p = 0
    Rotation,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    StreamTilde,
    StreamCe,
    VelPiola,
    VelCe,
}

#[derive(Clone, Copy, ValueEnum)]
enum PreconditionerArg {
    /// Diagonal scaling
    Jacobi,
    /// Sparse Cholesky factor of the matrix with one unknown pinned
    Cholesky,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum, default_value = "ellipsoid")]
    surface: SurfaceArg,
    #[arg(long, value_enum, default_value = "smooth")]
    data: DataArg,
    /// Polynomial degree of the stream function (2..=4).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Polynomial degree of the surface approximation (1..=4).
    #[arg(long, default_value_t = 2)]
    kg: usize,
    /// Refinement levels, `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..4")]
    levels: String,
    /// Penalty parameter [default: 10 k^2].
    #[arg(long)]
    sigma: Option<f64>,
    /// Quadrature exactness [default: 2k + 2].
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    solver_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Preconditioner for the projected conjugate-gradient solve.
    #[arg(long, value_enum, default_value = "cholesky")]
    preconditioner: PreconditionerArg,
    /// Error measures to compute.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "stream-tilde,stream-ce,vel-piola,vel-ce")]
    variants: Vec<VariantArg>,
    /// Output file; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Fill the `seconds` column with wall time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    surface: SurfaceArg,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    kg: usize,
    /// Penalty parameter [default: 10 k^2].
    #[arg(long)]
    sigma: Option<f64>,
    /// Negate the penalty term (negative control: coercivity must fail).
    #[arg(long)]
    flip_penalty_sign: bool,
    /// Write the JSON summary here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn study(a: StudyArgs) -> ExitCode {
    let levels = match parse_levels(&a.levels) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let config = StudyConfig {
        surface: a.surface.into(),
        data: match a.data {
            DataArg::Smooth => DataChoice::Smooth,
            DataArg::Rotation => DataChoice::Rotation,
        },
        k: a.k,
        kg: a.kg,
        levels,
        sigma: a.sigma,
        quad_order: a.quad_order,
        solver_tol: a.solver_tol,
        max_iter: a.max_iter,
        preconditioner: match a.preconditioner {
            PreconditionerArg::Jacobi => Preconditioner::Jacobi,
            PreconditionerArg::Cholesky => Preconditioner::PinnedCholesky,
        },
        variants: a
            .variants
            .iter()
            .map(|v| match v {
                VariantArg::StreamTilde => Variant::StreamTilde,
                VariantArg::StreamCe => Variant::StreamCe,
                VariantArg::VelPiola => Variant::VelPiola,
                VariantArg::VelCe => Variant::VelCe,
            })
            .collect(),
        out: a.out,
        format: match a.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Md => OutputFormat::Markdown,
        },
        timing: a.timing,
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = run_convergence_study_with(&config, |r| {
        eprintln!(
            "level {}: ndof {}, {} iterations, {:.2}s",
            r.level, r.ndof, r.iterations, r.seconds
        );
    });
    match result {
        Ok(report) => {
            if config.out.is_none() {
                match report.render() {
                    Ok(bytes) => print!("{}", String::from_utf8_lossy(&bytes)),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::FAILURE;
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::FAILURE
        }
    }
}

fn verify(a: VerifyArgs) -> ExitCode {
    let config = VerifyConfig {
        surface: a.surface.into(),
        level: a.level,
        k: a.k,
        kg: a.kg,
        sigma: a.sigma,
        flip_penalty_sign: a.flip_penalty_sign,
        ..VerifyConfig::default()
    };
    let report = match run_verification(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = a.out {
        if let Err(e) = std::fs::write(&path, format!("{json}\n")) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    for s in &report.suites {
        eprintln!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Study(a) => study(a),
        Command::Verify(a) => verify(a),
    }
}
