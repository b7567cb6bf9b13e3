//! Command-line front end: factorization, Wiener filtering, identification,
//! simulation and verification of low-rank spectral models.
//!
//! Exit codes: 0 success, 2 input/validation error, 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use specfact::error::Error;
use specfact::factor::{
    spectral_factor, verify_factor, FactorOptions, G1Source, PartitionedSpectralDensity,
};
use specfact::ident::{
    estimate_arma_pem, estimate_h_ls, identify_innovation_model, simulate_lowrank_process,
    IdentOrders, TimeSeries,
};
use specfact::rational::Variable;
use specfact::report::{
    complex_pairs, FactorizationReport, IdentifyReport, VerifyReport, WienerReport,
};
use specfact::rmatrix::{RationalMatrix, RationalMatrixDoc};
use specfact::tol;
use specfact::wiener::wiener_filter;

#[derive(Parser)]
#[command(
    name = "specfact",
    version,
    about = "Minimum-phase spectral factorization of rank-deficient rational densities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a minimum-phase full-column-rank spectral factor.
    Factorize(FactorizeArgs),
    /// Compute the one-step-ahead Wiener filter of a factor's partition.
    Wiener(WienerArgs),
    /// Identify an innovation model from sampled data.
    Identify(IdentifyArgs),
    /// Simulate a low-rank process driven by Gaussian innovations.
    Simulate(SimulateArgs),
    /// Re-run all invariant checks for a (density, factor) pair.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeDomain {
    Discrete,
    Continuous,
}

impl TimeDomain {
    fn variable(self) -> Variable {
        match self {
            TimeDomain::Discrete => Variable::Z,
            TimeDomain::Continuous => Variable::S,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputMode {
    /// Input document is the density itself.
    Density,
    /// Input document is a stable full-column-rank factor of the density.
    StableFactor,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Time domain; must match the input document's variable.
    #[arg(long, value_enum)]
    time: Option<TimeDomain>,
    /// Density or stable-factor document (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Partition: size of the full-rank leading block.
    #[arg(long)]
    m: usize,
    /// How to read the input document.
    #[arg(long, value_enum, default_value = "density")]
    mode: InputMode,
    /// Optional G1 document; when absent, stable-factor mode extracts the
    /// outer factor and density mode requires a scalar leading block.
    #[arg(long)]
    g1: Option<PathBuf>,
    /// Unitary parameter: "identity", "-identity" or a JSON file with a
    /// nested row-major array.
    #[arg(long = "P", default_value = "identity")]
    p: String,
    /// Boundary grid size for residual verification.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Residual tolerance (relative).
    #[arg(long = "tol-residual", default_value_t = 1e-7)]
    tol_residual: f64,
    /// Root-cancellation tolerance.
    #[arg(long = "tol-cancel", default_value_t = 1e-8)]
    tol_cancel: f64,
    /// In stable-factor mode, form H G1 = W_o2 Q^* directly.
    #[arg(long)]
    shortcut: bool,
    /// Output directory for the factor documents and report.
    #[arg(long)]
    output: PathBuf,
    /// Print a human-readable summary as well.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct WienerArgs {
    /// Minimum-phase factor document (JSON, discrete time).
    #[arg(long)]
    input: PathBuf,
    /// Partition: rows of W1.
    #[arg(long)]
    m: usize,
    #[arg(long = "tol-cancel", default_value_t = 1e-8)]
    tol_cancel: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    /// CSV data file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Partition: number of leading channels (must be 1).
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Orders as "h_num,h_den,ar,ma".
    #[arg(long, default_value = "1,1,1,1")]
    orders: String,
    #[arg(long = "tol-cancel", default_value_t = 1e-8)]
    tol_cancel: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Stable factor document (JSON, discrete time).
    #[arg(long)]
    input: PathBuf,
    /// Partition recorded for downstream identification.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Number of retained samples.
    #[arg(long, short = 'n', default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Burn-in prefix discarded before recording.
    #[arg(long = "burn-in", default_value_t = 200)]
    burn_in: usize,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Density document (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Factor document to check against the density.
    #[arg(long)]
    factor: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long = "tol-residual", default_value_t = 1e-7)]
    tol_residual: f64,
    #[arg(long = "tol-cancel", default_value_t = 1e-8)]
    tol_cancel: f64,
    /// Optional report path (stdout otherwise).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Factorize(args) => run_factorize(args),
        Command::Wiener(args) => run_wiener(args),
        Command::Identify(args) => run_identify(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Verify(args) => run_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::VerificationFailure(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn log_enabled() -> bool {
    std::env::var("SPECFACT_LOG").map_or(false, |v| !v.is_empty() && v != "0")
}

fn log(msg: &str) {
    if log_enabled() {
        eprintln!("specfact: {msg}");
    }
}

fn read_matrix(path: &Path, expect_var: Option<Variable>) -> Result<RationalMatrix, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let doc: RationalMatrixDoc = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    if let Some(v) = expect_var {
        if doc.variable != v {
            return Err(Error::InvalidInput(format!(
                "{}: document variable {} does not match the requested time domain",
                path.display(),
                doc.variable
            )));
        }
    }
    RationalMatrix::from_document(&doc)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn parse_unitary(spec: &str, m: usize) -> Result<Option<DMatrix<f64>>, Error> {
    match spec {
        "identity" | "I" => Ok(None),
        "-identity" | "-I" => Ok(Some(-DMatrix::<f64>::identity(m, m))),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("{path}: {e}")))?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("{path}: {e}")))?;
            let nr = rows.len();
            let nc = rows.first().map_or(0, |r| r.len());
            if nr != m || nc != m || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::InvalidInput(format!("{path}: expected a {m}x{m} array")));
            }
            Ok(Some(DMatrix::from_fn(m, m, |i, j| rows[i][j])))
        }
    }
}

fn parse_orders(spec: &str) -> Result<IdentOrders, Error> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad order '{t}'")))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    if parts.len() != 4 {
        return Err(Error::InvalidInput(
            "--orders needs four comma-separated integers: h_num,h_den,ar,ma".into(),
        ));
    }
    Ok(IdentOrders {
        h_num: parts[0],
        h_den: parts[1],
        arma_ar: parts[2],
        arma_ma: parts[3],
    })
}

fn check_tols(grid: usize, tol_residual: f64, tol_cancel: f64) -> Result<(), Error> {
    if grid < 16 {
        return Err(Error::InvalidInput("grid size must be at least 16".into()));
    }
    if !(tol_residual > 0.0) || !(tol_cancel > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    tol::set_cancel(tol_cancel);
    Ok(())
}

fn run_factorize(args: FactorizeArgs) -> Result<ExitCode, Error> {
    check_tols(args.grid, args.tol_residual, args.tol_cancel)?;
    let var = args.time.map(TimeDomain::variable);
    let input = read_matrix(&args.input, var)?;
    log(&format!(
        "read {}x{} {} document",
        input.rows(),
        input.cols(),
        input.var()
    ));
    let (density, source) = match args.mode {
        InputMode::Density => {
            let density = PartitionedSpectralDensity::new(input, args.m)?;
            let source = match &args.g1 {
                Some(path) => G1Source::Given(read_matrix(path, Some(density.var()))?),
                None => G1Source::ScalarDensity,
            };
            (density, source)
        }
        InputMode::StableFactor => {
            let density = PartitionedSpectralDensity::from_factor(&input, args.m)?;
            let source = match &args.g1 {
                Some(path) => G1Source::Given(read_matrix(path, Some(density.var()))?),
                None => G1Source::StableFactor(input),
            };
            (density, source)
        }
    };
    let opts = FactorOptions {
        unitary_p: parse_unitary(&args.p, args.m)?,
        grid_points: args.grid,
        residual_tol: args.tol_residual,
        stable_factor_shortcut: args.shortcut,
    };
    let result = spectral_factor(&density, &source, &opts)?;
    ensure_dir(&args.output)?;
    write_json(&args.output.join("phi.json"), &density.phi().to_document())?;
    write_json(&args.output.join("w.json"), &result.w.to_document())?;
    write_json(&args.output.join("q1.json"), &result.q1.to_document())?;
    write_json(&args.output.join("h.json"), &result.h.to_document())?;
    write_json(&args.output.join("g1.json"), &result.g1.to_document())?;
    let report =
        FactorizationReport::from_result(&result, args.tol_residual, args.tol_cancel, args.grid);
    write_json(&args.output.join("report.json"), &report)?;
    if args.summary {
        print!("{}", report.summary());
    }
    log("factorization complete");
    Ok(ExitCode::SUCCESS)
}

fn run_wiener(args: WienerArgs) -> Result<ExitCode, Error> {
    check_tols(256, 1e-7, args.tol_cancel)?;
    let w = read_matrix(&args.input, Some(Variable::Z))?;
    if args.m == 0 || args.m >= w.rows() || w.cols() != args.m {
        return Err(Error::InvalidInput(format!(
            "partition m = {} inconsistent with a {}x{} factor",
            args.m,
            w.rows(),
            w.cols()
        )));
    }
    let w1 = w.block(0, 0, args.m, args.m);
    let w2 = w.block(args.m, 0, w.rows() - args.m, args.m);
    let fb = wiener_filter(&w1, &w2)?;
    ensure_dir(&args.output)?;
    write_json(&args.output.join("f_plus.json"), &fb.f_plus.to_document())?;
    write_json(&args.output.join("k_plus.json"), &fb.k_plus.to_document())?;
    // residual of W1 = z^-1 F_plus W2 + K_plus, as max-abs numerator after
    // canonical subtraction
    let recon = fb
        .f
        .mul(&w2)?
        .add(&fb.k_plus)?
        .sub(&w1)?
        .entries()
        .iter()
        .flat_map(|e| e.num().coeffs())
        .fold(0.0_f64, |m, c| m.max(c.abs()));
    let report = WienerReport {
        variable: Variable::Z,
        strictly_causal: true,
        reconstruction_residual: recon,
        f_poles: complex_pairs(&fb.f.poles()),
        warnings: Vec::new(),
    };
    write_json(&args.output.join("report.json"), &report)?;
    Ok(ExitCode::SUCCESS)
}

fn run_identify(args: IdentifyArgs) -> Result<ExitCode, Error> {
    check_tols(256, 1e-7, args.tol_cancel)?;
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", args.input.display())))?;
    let series = TimeSeries::from_csv(&text, args.m)?;
    let orders = parse_orders(&args.orders)?;
    log(&format!(
        "identification on {} samples of dimension {}",
        series.len(),
        series.dim()
    ));
    let h = estimate_h_ls(&series, orders.h_num, orders.h_den)?;
    let fit = estimate_arma_pem(&series.column(0), orders.arma_ar, orders.arma_ma)?;
    let result = identify_innovation_model(&series, orders)?;
    ensure_dir(&args.output)?;
    write_json(&args.output.join("w.json"), &result.w.to_document())?;
    write_json(&args.output.join("g1.json"), &result.g1.to_document())?;
    write_json(&args.output.join("h.json"), &result.h.to_document())?;
    write_json(&args.output.join("q1.json"), &result.q1.to_document())?;
    let report = IdentifyReport {
        samples: series.len(),
        h_coefficients: h
            .entries()
            .iter()
            .map(|e| {
                e.num()
                    .coeffs()
                    .iter()
                    .chain(e.den().coeffs())
                    .copied()
                    .collect()
            })
            .collect(),
        arma_converged: fit.converged,
        innovation_variance: fit.innovation_variance,
        poles_w: complex_pairs(&result.diagnostics.poles_w),
        zeros_w: complex_pairs(&result.diagnostics.zeros_w),
        special_case: result.special_case,
        warnings: result.diagnostics.warnings.clone(),
    };
    write_json(&args.output.join("report.json"), &report)?;
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let w = read_matrix(&args.input, Some(Variable::Z))?;
    let series = simulate_lowrank_process(&w, args.samples, args.seed, args.m, args.burn_in)?;
    if let Some(dir) = args.output.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    std::fs::write(&args.output, series.to_csv())
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", args.output.display())))?;
    log(&format!("wrote {} samples", series.len()));
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    check_tols(args.grid, args.tol_residual, args.tol_cancel)?;
    let phi = read_matrix(&args.input, None)?;
    let w = read_matrix(&args.factor, Some(phi.var()))?;
    let density = PartitionedSpectralDensity::new(phi, args.m)?;
    let outcome = verify_factor(&density, &w, args.grid, args.tol_residual);
    let (pass, residual, messages) = match &outcome {
        Ok(r) => (true, *r, Vec::new()),
        Err(Error::VerificationFailure(msg)) => (false, f64::NAN, vec![msg.clone()]),
        Err(e) => return Err(e.clone()),
    };
    let report = VerifyReport {
        residual,
        residual_tolerance: args.tol_residual,
        minimum_phase: pass,
        stable: w.is_stable(),
        pass,
        messages,
    };
    match &args.output {
        Some(path) => write_json(path, &report)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidInput(e.to_string()))?
        ),
    }
    if pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(3))
    }
}
