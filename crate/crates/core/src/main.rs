use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use framelet::filter::{FilterCheck, FilterEvaluator, DEFAULT_QMF_GRID};
use framelet::lattice::{
    reduce_with_bound, special_vectors, IntMat2, LatticeData, Reduction, DEFAULT_SEARCH_BOUND,
};
use framelet::lawton::{self, FilterDocument, LawtonResidual, SolverOptions};
use framelet::persist::{self, REPORT_FILE};
use framelet::scaling::SynthesisParams;
use framelet::verify::{verify_system, VerifyOptions};
use framelet::wavelet::{build_system, BuildOptions};
use framelet::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_REDUCTION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

/// Parseval frame wavelets for 2×2 integer dilations of determinant ±2.
#[derive(Parser)]
#[command(name = "framelet", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find S with S·A·S⁻¹ equal to one of the six canonical forms.
    Reduce {
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: IntMat2,
        /// Largest |entry| tried for S.
        #[arg(long, default_value_t = DEFAULT_SEARCH_BOUND, value_parser = clap::value_parser!(i64).range(1..))]
        bound: i64,
    },
    /// Solve the filter equations for the canonical form of a matrix.
    Solve {
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: IntMat2,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residuals and symbol checks for a stored filter.
    FilterCheck {
        #[arg(long)]
        filter: PathBuf,
        #[arg(long, default_value_t = DEFAULT_QMF_GRID, value_parser = positive_usize)]
        grid: usize,
    },
    /// Full pipeline: reduce, solve, synthesise φ and ψ, verify.
    Build {
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: IntMat2,
        #[command(flatten)]
        solver: SolverArgs,
        /// Use a stored filter instead of solving.
        #[arg(long)]
        filter: Option<PathBuf>,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        /// Skip verification and report.json.
        #[arg(long)]
        no_verify: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the checks on a stored system.
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[command(flatten)]
        verify: VerifyArgs,
        /// Report path; defaults to report.json inside the system directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one field as grid metadata JSON plus a values-only CSV.
    Export {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, value_enum, default_value_t = FieldName::Psi)]
        field: FieldName,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..))]
    n0: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32, value_parser = positive_usize)]
    starts: usize,
    #[arg(long, default_value_t = 300, value_parser = positive_usize)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-12, value_parser = parse_tol)]
    tol: f64,
    /// Allow complex taps.
    #[arg(long)]
    complex: bool,
    /// Do not try the Haar pair as the first start.
    #[arg(long)]
    no_haar_start: bool,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            random_starts: self.starts,
            haar_start: !self.no_haar_start,
            max_iter: self.max_iter,
            tol: self.tol,
            complex: self.complex,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Depth of the truncated product.
    #[arg(long = "J", default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    j: u32,
    /// Frequency samples per axis.
    #[arg(long, default_value_t = 1024, value_parser = positive_usize)]
    grid_n: usize,
    /// Frequency box half-width in multiples of π.
    #[arg(long, default_value_t = 32.0, value_parser = positive_f64)]
    extent_pi: f64,
}

impl SynthArgs {
    fn params(&self) -> SynthesisParams {
        SynthesisParams {
            j: self.j,
            grid_extent: self.extent_pi * PI,
            grid_n: self.grid_n,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Level range `lo:hi` for the frame ratio.
    #[arg(long, default_value = "-6:6", value_parser = parse_levels, allow_hyphen_values = true)]
    levels: (i32, i32),
    /// Samples per axis for the test functions.
    #[arg(long, default_value_t = 512, value_parser = positive_usize)]
    grid: usize,
    /// Extra product depth for the truncation check; 0 skips it.
    #[arg(long, default_value_t = 4)]
    stability_extra_j: u32,
}

impl VerifyArgs {
    fn options(&self) -> VerifyOptions {
        VerifyOptions {
            levels: self.levels,
            grid: self.grid,
            stability_extra_j: self.stability_extra_j,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldName {
    Phi,
    PsiC,
    Psi,
}

fn parse_matrix(s: &str) -> Result<IntMat2, String> {
    s.parse::<IntMat2>().map_err(|e| e.to_string())
}

fn parse_levels(s: &str) -> Result<(i32, i32), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: i32 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: i32 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if lo > hi {
        return Err(format!("empty level range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1e-6 => Ok(v),
        Ok(_) => Err("tolerance must lie in (0, 1e-6]".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotReducible { .. } => EXIT_REDUCTION,
        Error::NoConvergence { .. } | Error::FilterRejected { .. } => EXIT_SOLVER,
        Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::MismatchedFilter(_) => EXIT_IO,
        Error::InvalidN0(_)
        | Error::GridTooCoarse { .. }
        | Error::InvalidParameter(_)
        | Error::DegenerateInput(_) => EXIT_USAGE,
    }
}

#[derive(Serialize)]
struct ReduceOutput {
    input: IntMat2,
    #[serde(flatten)]
    reduction: Reduction,
    lattice: LatticeData,
}

#[derive(Serialize)]
struct FilterCheckOutput {
    validated: bool,
    lawton: LawtonResidual,
    symbol: FilterCheck,
}

fn print_json<T: Serialize>(value: &T) -> framelet::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_or_print<T: Serialize>(out: Option<&Path>, value: &T) -> framelet::Result<()> {
    match out {
        Some(p) => persist::write_json(p, value),
        None => print_json(value),
    }
}

fn run(cmd: Cmd) -> framelet::Result<()> {
    match cmd {
        Cmd::Reduce { matrix, bound } => {
            let reduction = reduce_with_bound(&matrix, bound)?;
            let lattice = special_vectors(&reduction.canonical);
            print_json(&ReduceOutput {
                input: matrix,
                reduction,
                lattice,
            })
        }
        Cmd::Solve {
            matrix,
            solver,
            out,
        } => {
            let red = reduce_with_bound(&matrix, DEFAULT_SEARCH_BOUND)?;
            let c = red.canonical;
            let h = lawton::solve(&c, solver.n0, &solver.options())?;
            write_or_print(out.as_deref(), &h.to_document(c.matrix()))
        }
        Cmd::FilterCheck { filter, grid } => {
            let doc: FilterDocument = persist::read_json(&filter)?;
            let reduction = reduce_with_bound(&doc.matrix, DEFAULT_SEARCH_BOUND)?;
            let c = reduction.canonical;
            if c.matrix() != doc.matrix {
                return Err(Error::MismatchedFilter(format!(
                    "filter matrix {} is not canonical; reduce it to {} first",
                    doc.matrix,
                    c.matrix()
                )));
            }
            let h = doc.to_filter()?;
            let (validated, lawton) = lawton::validate(&h, &c, 1e-12);
            let symbol = FilterEvaluator::for_form(h, &c).check(grid);
            let pass = validated && symbol.qmf_residual <= 1e-10;
            let worst = symbol.qmf_residual.max(lawton.max_abs);
            print_json(&FilterCheckOutput {
                validated,
                lawton,
                symbol,
            })?;
            if pass {
                Ok(())
            } else {
                Err(Error::FilterRejected {
                    max_abs: worst,
                    tol: 1e-12,
                })
            }
        }
        Cmd::Build {
            matrix,
            solver,
            filter,
            synth,
            verify,
            no_verify,
            out,
        } => {
            let filter = match filter {
                Some(p) => Some(persist::read_json::<FilterDocument>(&p)?.to_filter()?),
                None => None,
            };
            let opts = BuildOptions {
                solver: solver.options(),
                synthesis: synth.params(),
                filter,
                crop_margin: None,
            };
            let sys = build_system(&matrix, solver.n0, &opts)?;
            let report = if no_verify {
                None
            } else {
                Some(verify_system(&sys, &verify.options())?)
            };
            persist::save_system(&out, &sys, report.as_ref())?;
            if let Some(r) = &report {
                summarize(r);
            }
            Ok(())
        }
        Cmd::Verify {
            system,
            verify,
            out,
        } => {
            let sys = persist::load_system(&system)?;
            let report = verify_system(&sys, &verify.options())?;
            let path = out.unwrap_or_else(|| system.join(REPORT_FILE));
            persist::write_json(&path, &report)?;
            summarize(&report);
            Ok(())
        }
        Cmd::Export { system, field, out } => {
            let sys = persist::load_system(&system)?;
            let (name, f) = match field {
                FieldName::Phi => ("phi", &sys.phi),
                FieldName::PsiC => ("psi_c", &sys.psi_c),
                FieldName::Psi => ("psi", &sys.psi),
            };
            persist::export_field(&out, name, f)?;
            Ok(())
        }
    }
}

fn summarize(r: &framelet::verify::VerificationReport) {
    let failing = r.failing();
    if failing.is_empty() {
        eprintln!("all {} checks pass", r.checks.len());
    } else {
        eprintln!(
            "{} of {} checks fail: {}",
            failing.len(),
            r.checks.len(),
            failing.join(", ")
        );
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FRAMELET_THREADS") else {
        return Ok(());
    };
    let n = positive_usize(v.trim()).map_err(|e| format!("FRAMELET_THREADS={v:?}: {e}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
