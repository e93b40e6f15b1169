//! Command-line surface: model-config loading, subcommand dispatch, report
//! emission.
//!
//! Exit codes: 0 when the command succeeds and every verdict passes, 1 when a
//! verification fails (the report is still emitted) or a computation breaks
//! down underway, 2 on usage and configuration errors. JSON reports go to
//! stdout and PASS/FAIL summary lines to stderr, so stdout is byte-identical
//! across reruns with the same config and seed. `--out DIR` additionally
//! writes the JSON plus CSV curve files into DIR.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::coeffs::{self, CoefficientModel, ModelConfig};
use crate::diag::{self, DiagError, HypRepresentation};
use crate::mat2::Mat2;
use crate::propagator::{self, SolveConfig};
use crate::report::{curve_csv, mat2_row, Csv, ReportEnvelope, MAT2_HEADER};
use crate::stabilize::{self, StabilizeError};
use crate::verify::{self, VerificationReport};
use crate::zones::{self, Zone, ZoneBoundaries};

#[derive(Parser)]
#[command(
    name = "zonewave",
    version,
    about = "Propagator laboratory for Fourier-mode wave systems with oscillating time-dependent dissipation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in coefficient families and their parameter ranges
    Examples,
    /// Check the admissibility conditions: shape, zero-mean boundedness,
    /// stabilisation, derivative growth, compatibility of the scales
    Check(CheckArgs),
    /// Tabulate the zone boundary times t1, t2 over a frequency grid (CSV)
    Zones(ZonesArgs),
    /// Compute the propagator at one (xi, s, t) with solver diagnostics
    Solve(SolveArgs),
    /// Run the stepwise diagonalization at one frequency and compare the
    /// reconstruction against the direct solve
    Diagonalize(DiagonalizeArgs),
    /// Measure the decay of sup_xi of the weighted propagator norm against
    /// the inverse shape factor 1/lambda
    VerifyDecay(VerifyDecayArgs),
    /// Track lambda(t) ||E(t,0,xi) v0|| along one frequency: the decay rate
    /// is attained, not just an upper bound
    VerifySharpness(VerifySharpnessArgs),
    /// Follow W(T) = E_*(T)^{-1} E(T,0,xi) to its large-time limit
    ModeLimit(ModeLimitArgs),
    /// Run the full verification battery on fixed grids (regression report)
    Report(ReportArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for the JSON report and CSV curve files (stdout always
    /// carries the JSON)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed recorded in the report header
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// JSON model config, e.g. {"family":"ex31","params":{"mu":0.4,"alpha":0.5}}
    model: PathBuf,
    /// Scan horizon in t; the growth detectors need at least four decades
    #[arg(long, default_value_t = 1e6)]
    horizon: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ZonesArgs {
    model: PathBuf,
    /// Frequency grid: log:A:B:N, lin:A:B:N, or a comma list v1,v2,...
    #[arg(long, default_value = "log:1e-4:1e2:60")]
    xi_grid: GridSpec,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SolveArgs {
    model: PathBuf,
    /// Frequency magnitude
    #[arg(long)]
    xi: f64,
    /// Target time
    #[arg(long)]
    t: f64,
    /// Start time (the propagator equals the identity there)
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    /// Drop the oscillation part: solve the shape-only system (2b = mu)
    #[arg(long, conflicts_with = "free")]
    sigma_off: bool,
    /// Drop the dissipation entirely: closed-form free propagator
    #[arg(long)]
    free: bool,
    /// Relative tolerance of the adaptive solver
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DiagonalizeArgs {
    model: PathBuf,
    #[arg(long)]
    xi: f64,
    /// Start time, or 'auto' for the hyperbolic entry time of this frequency
    #[arg(long, default_value = "auto")]
    s: String,
    /// Target time
    #[arg(long)]
    t: f64,
    /// Tail tolerance of the remainder series
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Reconstruction must match the direct solve to this relative residual
    #[arg(long, default_value_t = 1e-6)]
    max_residual: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyDecayArgs {
    model: PathBuf,
    /// Frequency grid for the sup approximation
    #[arg(long, default_value = "log:1e-4:1e2:40")]
    xi_grid: GridSpec,
    /// Time grid of the decay curve
    #[arg(long, default_value = "log:1:1e4:25")]
    t_grid: GridSpec,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifySharpnessArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Initial data (v1, v2): two reals, or four reals re,im,re,im
    #[arg(long, default_value = "1,0")]
    v0: String,
    #[arg(long, default_value = "log:10:1e4:25")]
    t_grid: GridSpec,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ModeLimitArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Number of T-doublings past the hyperbolic entry (schedule 4 t2 2^k)
    #[arg(long, default_value_t = 7)]
    doublings: usize,
    /// Explicit time schedule overriding --doublings
    #[arg(long)]
    t_schedule: Option<GridSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReportArgs {
    model: PathBuf,
    /// Scan horizon for the admissibility checks
    #[arg(long, default_value_t = 1e6)]
    horizon: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// A typed range spec: `log:A:B:N` (log-uniform), `lin:A:B:N` (uniform), or
/// an explicit comma list. Parsed points must be finite, nonempty, strictly
/// increasing.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub spec: String,
    pub points: Vec<f64>,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<GridSpec, String> {
        Ok(GridSpec {
            spec: s.to_string(),
            points: parse_grid(s)?,
        })
    }
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    fn num(s: &str) -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{s}' is not a number"))
    }
    fn count(s: &str) -> Result<usize, String> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("'{s}' is not a point count"))
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let points = match parts.as_slice() {
        ["log", a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            if !(a > 0.0) {
                return Err(format!("log grid needs a positive start, got {a}"));
            }
            if !(b > a) || n < 2 {
                return Err(format!("log grid needs B > A and N >= 2, got {spec}"));
            }
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
        ["lin", a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            if !(b > a) || n < 2 {
                return Err(format!("lin grid needs B > A and N >= 2, got {spec}"));
            }
            (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect()
        }
        [list] => list
            .split(',')
            .map(num)
            .collect::<Result<Vec<f64>, String>>()?,
        _ => {
            return Err(format!(
                "grid spec '{spec}' not recognised; use log:A:B:N, lin:A:B:N, or v1,v2,..."
            ))
        }
    };
    if points.is_empty() {
        return Err("grid is empty".to_string());
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(format!("grid '{spec}' contains non-finite points"));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("grid '{spec}' must be strictly increasing"));
    }
    Ok(points)
}

/// "1,0" (two reals) or "1,0,0,-1" (re,im,re,im).
pub fn parse_v0(s: &str) -> Result<[Complex64; 2], String> {
    let nums = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("--v0 component '{p}' is not a number"))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let v = match nums.as_slice() {
        [a, b] => [Complex64::new(*a, 0.0), Complex64::new(*b, 0.0)],
        [ar, ai, br, bi] => [Complex64::new(*ar, *ai), Complex64::new(*br, *bi)],
        _ => {
            return Err(format!(
                "--v0 needs 2 reals or 4 reals (re,im,re,im), got {} values",
                nums.len()
            ))
        }
    };
    if v[0].norm_sqr() + v[1].norm_sqr() == 0.0 {
        return Err("--v0 must be nonzero".to_string());
    }
    Ok(v)
}

pub enum CliError {
    /// Usage or configuration problem; exit code 2.
    Config(String),
    /// A computation failed or a cross-check broke down; exit code 1.
    Run(String),
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn verify_err(e: verify::VerifyError) -> CliError {
    use verify::VerifyError::*;
    match e {
        XiBelowCutoff { .. } | PointOutsideZone { .. } | BadGrid { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Run(e.to_string()),
    }
}

fn diag_err(e: DiagError) -> CliError {
    match e {
        DiagError::ZoneConstantTooSmall { .. } | DiagError::OutsideZone { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Run(e.to_string()),
    }
}

/// Parses argv and runs the selected command, returning the process exit code.
pub fn main_from_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version print to stdout and exit 0; real usage errors exit 2
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Examples => Ok(cmd_examples()),
        Command::Check(args) => cmd_check(args),
        Command::Zones(args) => cmd_zones(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Diagonalize(args) => cmd_diagonalize(args),
        Command::VerifyDecay(args) => cmd_verify_decay(args),
        Command::VerifySharpness(args) => cmd_verify_sharpness(args),
        Command::ModeLimit(args) => cmd_mode_limit(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_model(path: &Path) -> Result<(ModelConfig, CoefficientModel), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read model config {}: {e}", path.display()))
    })?;
    let config: ModelConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("malformed model config {}: {e}", path.display()))
    })?;
    let model = config.build().map_err(|e| {
        CliError::Config(format!("invalid model config {}: {e}", path.display()))
    })?;
    Ok((config.resolved(&model), model))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Prints the JSON to stdout and, with --out, writes it plus the CSV files.
fn emit<T: Serialize>(
    envelope: &ReportEnvelope<T>,
    output: &OutputArgs,
    csvs: &[(String, String)],
) -> Result<(), CliError> {
    let json = envelope.to_json();
    print!("{json}");
    if let Some(dir) = &output.out {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        write_file(dir, &format!("{}.json", envelope.command), &json)?;
        for (name, text) in csvs {
            write_file(dir, &format!("{name}.csv"), text)?;
        }
    }
    Ok(())
}

fn report_curve_csvs(prefix: &str, report: &VerificationReport) -> Vec<(String, String)> {
    report
        .curves
        .iter()
        .map(|(name, curve)| (format!("{prefix}_{name}"), curve_csv("t", "value", curve)))
        .collect()
}

fn print_flags(report: &VerificationReport) {
    for (name, flag) in &report.pass_flags {
        eprintln!(
            "{name}: {} (observed {:.6e} against {:.6e})",
            if flag.passed { "PASS" } else { "FAIL" },
            flag.observed,
            flag.threshold
        );
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
}

fn cmd_examples() -> i32 {
    for f in coeffs::family_catalog() {
        println!("{}: {}", f.name, f.coefficients);
        println!("  parameters: {}", f.parameters);
        println!("  notes: {}", f.notes);
    }
    0
}

#[derive(Serialize)]
struct CheckBody {
    horizon: f64,
    omega_inf: Option<f64>,
    zero_mean_sup: f64,
    ratio_curve: Vec<(f64, f64)>,
    pass_flags: BTreeMap<String, bool>,
    shape: coeffs::ShapeCheck,
    zero_mean: stabilize::ZeroMeanCheck,
    omega_estimate: Option<stabilize::OmegaEstimate>,
    stabilisation: Option<stabilize::StabilizationReport>,
    derivative_growth: coeffs::SymbolGrowthCheck,
    compatibility: coeffs::CompatibilityCheck,
    jet_consistency: coeffs::JetConsistency,
    notes: Vec<String>,
}

const CHECK_ORDER: [&str; 6] = [
    "shape",
    "zero_mean",
    "stabilisation",
    "derivative_growth",
    "compatibility",
    "jet_consistency",
];

fn run_check(model: &CoefficientModel, horizon: f64) -> Result<(CheckBody, bool), CliError> {
    let scan_max = horizon.min(1e6);
    let shape = coeffs::check_shape(model, scan_max);
    let zero_mean = stabilize::check_zero_mean(model, horizon).map_err(run_err)?;

    let mut notes = Vec::new();
    let (omega_estimate, stabilisation) = match stabilize::estimate_omega_inf_detailed(model, horizon)
    {
        Ok(est) => {
            let t_grid = verify::decade_grid(1.0, horizon, 8);
            let rep = stabilize::stabilization_functional(model, est.omega_inf, &t_grid)
                .map_err(run_err)?;
            (Some(est), Some(rep))
        }
        Err(StabilizeError::NonStabilising {
            horizon,
            drift_prev,
            drift_last,
        }) => {
            notes.push(format!(
                "the running oscillation integral keeps drifting ({drift_prev:.3e} then \
                 {drift_last:.3e} per decade at horizon {horizon:.3e}); no stabilisation \
                 limit to test against"
            ));
            (None, None)
        }
        Err(e) => return Err(run_err(e)),
    };

    let derivative_growth = coeffs::check_symbol_growth(model, scan_max);
    let compatibility = coeffs::check_compatibility(model, scan_max).map_err(run_err)?;
    let jet_consistency =
        coeffs::check_jet_consistency(model, &verify::log_grid(1e-2, scan_max, 40));

    let mut pass_flags = BTreeMap::new();
    pass_flags.insert("shape".to_string(), shape.pass);
    pass_flags.insert("zero_mean".to_string(), zero_mean.pass);
    pass_flags.insert(
        "stabilisation".to_string(),
        stabilisation.as_ref().map(|r| r.pass).unwrap_or(false),
    );
    pass_flags.insert("derivative_growth".to_string(), derivative_growth.pass);
    pass_flags.insert("compatibility".to_string(), compatibility.pass);
    pass_flags.insert("jet_consistency".to_string(), jet_consistency.pass);
    let all_pass = pass_flags.values().all(|&b| b);

    let body = CheckBody {
        horizon,
        omega_inf: omega_estimate.as_ref().map(|e| e.omega_inf),
        zero_mean_sup: zero_mean.sup,
        ratio_curve: stabilisation
            .as_ref()
            .map(|r| r.ratio_curve.clone())
            .unwrap_or_default(),
        pass_flags,
        shape,
        zero_mean,
        omega_estimate,
        stabilisation,
        derivative_growth,
        compatibility,
        jet_consistency,
        notes,
    };
    Ok((body, all_pass))
}

fn check_csvs(prefix: &str, body: &CheckBody) -> Vec<(String, String)> {
    let mut csvs = Vec::new();
    if let Some(rep) = &body.stabilisation {
        csvs.push((format!("{prefix}_s_curve"), curve_csv("t", "s", &rep.s_curve)));
        csvs.push((
            format!("{prefix}_ratio_curve"),
            curve_csv("t", "ratio", &rep.ratio_curve),
        ));
    }
    csvs.push((
        format!("{prefix}_compatibility"),
        curve_csv("t", "tail_times_theta_m", &body.compatibility.curve),
    ));
    for order in &body.derivative_growth.per_order {
        csvs.push((
            format!("{prefix}_growth_order{}", order.k),
            curve_csv("t", "envelope", &order.envelope),
        ));
    }
    csvs
}

fn cmd_check(args: &CheckArgs) -> Result<i32, CliError> {
    if !(args.horizon >= 1e4) {
        return Err(CliError::Config(format!(
            "--horizon must be at least 1e4 (the growth detectors need four decades), got {}",
            args.horizon
        )));
    }
    let (config, model) = load_model(&args.model)?;
    let (body, all_pass) = run_check(&model, args.horizon)?;
    for name in CHECK_ORDER {
        eprintln!(
            "{name}: {}",
            if body.pass_flags[name] { "PASS" } else { "FAIL" }
        );
    }
    for note in &body.notes {
        eprintln!("note: {note}");
    }
    let csvs = check_csvs("check", &body);
    emit(
        &ReportEnvelope::new("check", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if all_pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct ZonesBody {
    xi_grid: String,
    rows: Vec<ZoneBoundaries>,
}

fn cmd_zones(args: &ZonesArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    if args.xi_grid.points[0] <= 0.0 {
        return Err(CliError::Config(
            "zone boundaries need xi > 0 throughout the grid".to_string(),
        ));
    }
    let rows: Vec<ZoneBoundaries> = args
        .xi_grid
        .points
        .iter()
        .map(|&xi| zones::boundaries(&model, xi))
        .collect();
    let mut csv = Csv::new(&["xi", "t1", "t2"]);
    for r in &rows {
        csv.row(&[r.xi, r.t1, r.t2]);
    }
    let csv = csv.finish();
    print!("{csv}");
    if let Some(dir) = &args.output.out {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        write_file(dir, "zones.csv", &csv)?;
        let body = ZonesBody {
            xi_grid: args.xi_grid.spec.clone(),
            rows,
        };
        let envelope = ReportEnvelope::new("zones", config, args.output.seed, body);
        write_file(dir, "zones.json", &envelope.to_json())?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct SolveBody {
    xi: f64,
    s: f64,
    t: f64,
    variant: String,
    rel_tol: f64,
    matrix: [f64; 8],
    det: [f64; 2],
    norm: f64,
    min_singular_value: f64,
    steps: usize,
    rejected: usize,
    /// |det E * exp(integral of the trace) - 1|: the Liouville identity.
    det_residual: f64,
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    if !(args.xi > 0.0) {
        return Err(CliError::Config(format!(
            "--xi must be positive, got {}",
            args.xi
        )));
    }
    if args.s < 0.0 || args.t < 0.0 {
        return Err(CliError::Config(format!(
            "times must be nonnegative, got s = {}, t = {}",
            args.s, args.t
        )));
    }
    if !(1e-14..=1e-2).contains(&args.rel_tol) {
        return Err(CliError::Config(format!(
            "--rel-tol must lie in [1e-14, 1e-2], got {}",
            args.rel_tol
        )));
    }
    let cfg = SolveConfig::with_rel_tol(args.rel_tol);
    let (variant, e, stats) = if args.free {
        (
            "free",
            propagator::free_propagator(args.xi, args.s, args.t),
            propagator::SolveStats::default(),
        )
    } else if args.sigma_off {
        let (e, st) = propagator::solve_E_mu_with_stats(&model, args.xi, args.s, args.t, &cfg)
            .map_err(run_err)?;
        ("shape_only", e, st)
    } else {
        let (e, st) = propagator::solve_E_with_stats(&model, args.xi, args.s, args.t, &cfg)
            .map_err(run_err)?;
        ("full", e, st)
    };

    let lam_ratio = model.lambda(args.t).map_err(run_err)? / model.lambda(args.s).map_err(run_err)?;
    let trace_exp = match variant {
        "free" => 1.0,
        "shape_only" => lam_ratio.powi(2),
        _ => {
            lam_ratio.powi(2)
                * model
                    .sigma_integral_between(args.s, args.t)
                    .map_err(run_err)?
                    .exp()
        }
    };
    let det = e.det();
    let det_residual = (det * Complex64::new(trace_exp, 0.0) - Complex64::ONE).norm();

    let body = SolveBody {
        xi: args.xi,
        s: args.s,
        t: args.t,
        variant: variant.to_string(),
        rel_tol: args.rel_tol,
        matrix: mat2_row(&e),
        det: [det.re, det.im],
        norm: e.norm(),
        min_singular_value: e.min_singular_value(),
        steps: stats.steps,
        rejected: stats.rejected,
        det_residual,
    };
    let mut csv = Csv::new(&MAT2_HEADER);
    csv.row(&body.matrix);
    let csvs = vec![("solve_matrix".to_string(), csv.finish())];
    emit(
        &ReportEnvelope::new("solve", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct StageDiag {
    k: usize,
    sup_beta_abs: f64,
    /// (t, |beta_k(t)|) on the probe grid: the stagewise symbol size.
    beta_abs: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct DiagonalizeBody {
    xi: f64,
    s: f64,
    t: f64,
    series_tol: f64,
    steps: usize,
    stages: Vec<StageDiag>,
    im_delta_rel_max: f64,
    hermiticity_max: f64,
    phase_plus: [f64; 2],
    phase_minus: [f64; 2],
    q_remainder: [f64; 8],
    reconstructed: [f64; 8],
    direct: [f64; 8],
    rel_residual: f64,
    max_residual: f64,
    pass: bool,
}

fn cmd_diagonalize(args: &DiagonalizeArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    if !(args.xi > 0.0) {
        return Err(CliError::Config(format!(
            "--xi must be positive, got {}",
            args.xi
        )));
    }
    let bounds = zones::boundaries(&model, args.xi);
    let s = if args.s == "auto" {
        if !bounds.t2.is_finite() {
            return Err(CliError::Config(format!(
                "the hyperbolic zone never opens for xi = {}: Theta(t) xi stays below the \
                 zone constant for all representable t; pass an explicit --s",
                args.xi
            )));
        }
        bounds.t2
    } else {
        args.s.parse::<f64>().map_err(|_| {
            CliError::Config(format!("--s must be a number or 'auto', got '{}'", args.s))
        })?
    };
    if s < 0.0 || args.t <= s {
        return Err(CliError::Config(format!(
            "need 0 <= s < t, got s = {s:.6e}, t = {:.6e}",
            args.t
        )));
    }
    let n = model.zone_constant;
    if model.theta(s) * args.xi * (1.0 + 1e-9) < n {
        return Err(CliError::Config(format!(
            "(s, xi) = ({s:.6e}, {:.6e}) is not in the hyperbolic zone: Theta(s) xi = {:.6e} \
             is below the zone constant {n}; the entry time for this xi is {:.6e} (--s auto)",
            args.xi,
            model.theta(s) * args.xi,
            bounds.t2
        )));
    }

    let ladder = HypRepresentation::build(&model);
    match ladder.check_zone_guard(args.xi, s.max(1e-12), args.t) {
        Ok(()) => {}
        Err(e) => return Err(diag_err(e)),
    }
    let (q, phase_p, phase_m) = ladder
        .q_m_with_phases(args.xi, s, args.t, args.tol)
        .map_err(diag_err)?;
    let i = Complex64::i();
    let phase = Mat2::diag((i * phase_p).exp(), (i * phase_m).exp());
    let t_s_inv = ladder
        .t_factor(s, args.xi)
        .inverse()
        .expect("N_k factors are invertible under the zone guard");
    let reconstructed = ladder.t_factor(args.t, args.xi) * phase * q * t_s_inv;
    let (direct, stats) =
        propagator::solve_E_with_stats(&model, args.xi, s, args.t, &SolveConfig::default())
            .map_err(run_err)?;
    let rel_residual = (reconstructed - direct).norm() / direct.norm().max(1e-300);

    // stage diagnostics on a log probe grid inside [s, t]
    let lo = if s > 1e-3 {
        s
    } else {
        1e-3f64.min(0.5 * (s + args.t))
    };
    let probes = verify::log_grid(lo, args.t, 12);
    let mut stages = Vec::with_capacity(ladder.m + 1);
    let mut im_delta_rel_max = 0.0f64;
    let mut hermiticity_max = 0.0f64;
    for k in 0..=ladder.m {
        let mut curve = Vec::with_capacity(probes.len());
        let mut sup = 0.0f64;
        for &tp in &probes {
            let jets = ladder.stages[k].eval(tp, args.xi);
            let beta_abs = jets.beta.value().norm();
            curve.push((tp, beta_abs));
            sup = sup.max(beta_abs);
            let delta = jets.delta().value();
            im_delta_rel_max = im_delta_rel_max.max(delta.im.abs() / delta.norm().max(1e-300));
            hermiticity_max = hermiticity_max.max(jets.hermiticity_residual());
        }
        stages.push(StageDiag {
            k,
            sup_beta_abs: sup,
            beta_abs: curve,
        });
    }

    let pass = rel_residual <= args.max_residual;
    eprintln!(
        "reconstruction vs direct solve: {} (relative residual {rel_residual:.3e} against {:.3e})",
        if pass { "PASS" } else { "FAIL" },
        args.max_residual
    );

    let body = DiagonalizeBody {
        xi: args.xi,
        s,
        t: args.t,
        series_tol: args.tol,
        steps: stats.steps,
        stages,
        im_delta_rel_max,
        hermiticity_max,
        phase_plus: [phase_p.re, phase_p.im],
        phase_minus: [phase_m.re, phase_m.im],
        q_remainder: mat2_row(&q),
        reconstructed: mat2_row(&reconstructed),
        direct: mat2_row(&direct),
        rel_residual,
        max_residual: args.max_residual,
        pass,
    };
    let mut csvs: Vec<(String, String)> = body
        .stages
        .iter()
        .map(|st| {
            (
                format!("diagonalize_beta{}", st.k),
                curve_csv("t", "beta_abs", &st.beta_abs),
            )
        })
        .collect();
    let mut mcsv = Csv::new(&MAT2_HEADER);
    mcsv.row(&body.reconstructed);
    mcsv.row(&body.direct);
    csvs.push(("diagonalize_matrices".to_string(), mcsv.finish()));
    emit(
        &ReportEnvelope::new("diagonalize", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct DecayBody {
    xi_grid: Vec<f64>,
    t_grid: Vec<f64>,
    report: VerificationReport,
}

fn cmd_verify_decay(args: &VerifyDecayArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    let report = verify::theorem1_decay(&model, &args.xi_grid.points, &args.t_grid.points)
        .map_err(verify_err)?;
    print_flags(&report);
    let pass = report.passed();
    let csvs = report_curve_csvs("verify-decay", &report);
    let body = DecayBody {
        xi_grid: args.xi_grid.points.clone(),
        t_grid: args.t_grid.points.clone(),
        report,
    };
    emit(
        &ReportEnvelope::new("verify-decay", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct SharpnessBody {
    xi: f64,
    v0: [[f64; 2]; 2],
    t_grid: Vec<f64>,
    report: VerificationReport,
}

fn cmd_verify_sharpness(args: &VerifySharpnessArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    if !(args.xi > 0.0) {
        return Err(CliError::Config(format!(
            "--xi must be positive, got {}",
            args.xi
        )));
    }
    let v0 = parse_v0(&args.v0).map_err(CliError::Config)?;
    let report = verify::theorem2_sharpness(&model, args.xi, v0, &args.t_grid.points)
        .map_err(verify_err)?;
    print_flags(&report);
    let pass = report.passed();
    let csvs = report_curve_csvs("verify-sharpness", &report);
    let body = SharpnessBody {
        xi: args.xi,
        v0: [[v0[0].re, v0[0].im], [v0[1].re, v0[1].im]],
        t_grid: args.t_grid.points.clone(),
        report,
    };
    emit(
        &ReportEnvelope::new("verify-sharpness", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct WSample {
    t: f64,
    w: [f64; 8],
}

#[derive(Serialize)]
struct ModeLimitBody {
    xi: f64,
    t_ref: f64,
    t_schedule: Vec<f64>,
    predicted_det: f64,
    w_samples: Vec<WSample>,
    report: VerificationReport,
}

fn cmd_mode_limit(args: &ModeLimitArgs) -> Result<i32, CliError> {
    let (config, model) = load_model(&args.model)?;
    if !(args.xi > 0.0) {
        return Err(CliError::Config(format!(
            "--xi must be positive, got {}",
            args.xi
        )));
    }
    let schedule = match &args.t_schedule {
        Some(g) => g.points.clone(),
        None => {
            if args.doublings < 2 {
                return Err(CliError::Config(format!(
                    "--doublings must be at least 2 for Cauchy residuals, got {}",
                    args.doublings
                )));
            }
            let bounds = zones::boundaries(&model, args.xi);
            if !bounds.t2.is_finite() {
                return Err(CliError::Config(format!(
                    "the hyperbolic zone never opens for xi = {}; no default schedule exists",
                    args.xi
                )));
            }
            verify::default_t_schedule(&model, args.xi, args.doublings)
        }
    };
    let ml = verify::mode_limit(&model, args.xi, &schedule).map_err(verify_err)?;
    let report = ml.report();
    print_flags(&report);
    let pass = report.passed();
    let csvs = report_curve_csvs("mode-limit", &report);
    let body = ModeLimitBody {
        xi: ml.xi,
        t_ref: ml.t_ref,
        t_schedule: schedule,
        predicted_det: ml.predicted_det,
        w_samples: ml
            .w_samples
            .iter()
            .map(|(t, w)| WSample {
                t: *t,
                w: mat2_row(w),
            })
            .collect(),
        report,
    };
    emit(
        &ReportEnvelope::new("mode-limit", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct ZoneConstantBody {
    requested_n: f64,
    validated_n: f64,
    max_d: f64,
    worst_t: f64,
    worst_xi: f64,
}

#[derive(Serialize)]
struct ReportBody {
    horizon: f64,
    check: CheckBody,
    zone_constant: ZoneConstantBody,
    zones: Vec<ZoneBoundaries>,
    bands: Vec<verify::TwoSidedBand>,
    decay: DecayBody,
    sharpness: SharpnessBody,
    mode_limit: Option<ModeLimitBody>,
    pass_flags: BTreeMap<String, bool>,
    notes: Vec<String>,
}

/// Fixed grids: the regression report must hit identical bytes run to run,
/// so nothing here depends on timing or thread count.
fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    if !(args.horizon >= 1e4) {
        return Err(CliError::Config(format!(
            "--horizon must be at least 1e4, got {}",
            args.horizon
        )));
    }
    let (config, model) = load_model(&args.model)?;
    let mut notes = Vec::new();
    let mut pass_flags = BTreeMap::new();

    let (check, check_pass) = run_check(&model, args.horizon)?;
    pass_flags.insert("check".to_string(), check_pass);

    let zc = diag::validate_zone_constant(&model);
    pass_flags.insert("zone_constant".to_string(), zc.validated_n == zc.requested_n);
    if zc.validated_n != zc.requested_n {
        notes.push(format!(
            "the requested zone constant {} admits |d_k| up to {:.3e}; the first safe value \
             is {:.6}",
            zc.requested_n, zc.max_d, zc.validated_n
        ));
    }
    let zone_constant = ZoneConstantBody {
        requested_n: zc.requested_n,
        validated_n: zc.validated_n,
        max_d: zc.max_d,
        worst_t: zc.worst_t,
        worst_xi: zc.worst_xi,
    };

    let zone_rows: Vec<ZoneBoundaries> = verify::log_grid(1e-4, 1e2, 25)
        .iter()
        .map(|&xi| zones::boundaries(&model, xi))
        .collect();

    // two-sided bands at representative frequencies, where the zones admit
    // a window of at least two decades
    let mut bands = Vec::new();
    let hyp = zone_rows
        .iter()
        .rev()
        .find(|r| r.t2.is_finite() && r.t2 > 0.0);
    match hyp {
        Some(row) => {
            let lo = (row.t2 * 1.01).max(1e-3);
            let grid = verify::log_grid(lo, lo * 100.0, 17);
            match verify::two_sided_band(&model, row.xi, &grid, Zone::Hyperbolic) {
                Ok(b) => bands.push(b),
                Err(e) => notes.push(format!("hyperbolic band skipped: {e}")),
            }
        }
        None => notes.push("hyperbolic band skipped: no finite entry time on the grid".into()),
    }
    let inter = zone_rows
        .iter()
        .rev()
        .find(|r| r.t1 > 0.0 && r.t2.is_finite() && r.t2 / r.t1 > 150.0);
    match inter {
        Some(row) => {
            let lo = row.t1 * 1.001;
            let hi = (row.t1 * 100.0).min(row.t2 * 0.99);
            let grid = verify::log_grid(lo, hi, 17);
            match verify::two_sided_band(&model, row.xi, &grid, Zone::Intermediate) {
                Ok(b) => bands.push(b),
                Err(e) => notes.push(format!("intermediate band skipped: {e}")),
            }
        }
        None => notes.push(
            "intermediate band skipped: no frequency on the grid opens a two-decade window".into(),
        ),
    }
    match zone_rows.iter().find(|r| r.t1 >= 100.0) {
        Some(row) => {
            let hi = row.t1 * 0.999;
            let grid = verify::log_grid(hi / 100.0, hi, 17);
            match verify::two_sided_band(&model, row.xi, &grid, Zone::Dissipative) {
                Ok(b) => bands.push(b),
                Err(e) => notes.push(format!("dissipative band skipped: {e}")),
            }
        }
        None => notes.push(
            "dissipative band skipped: no frequency on the grid stays dissipative past t = 100"
                .into(),
        ),
    }
    pass_flags.insert("bands".to_string(), bands.iter().all(|b| b.passed()));

    let decay_xi = verify::log_grid(1e-3, 1e2, 25);
    let decay_t = verify::log_grid(1.0, 1e4, 17);
    let decay_report = verify::theorem1_decay(&model, &decay_xi, &decay_t).map_err(verify_err)?;
    pass_flags.insert("decay".to_string(), decay_report.passed());
    let decay = DecayBody {
        xi_grid: decay_xi,
        t_grid: decay_t,
        report: decay_report,
    };

    let sharp_t = verify::log_grid(10.0, 1e4, 17);
    let v0 = [Complex64::ONE, Complex64::ZERO];
    let sharp_report =
        verify::theorem2_sharpness(&model, 1.0, v0, &sharp_t).map_err(verify_err)?;
    pass_flags.insert("sharpness".to_string(), sharp_report.passed());
    let sharpness = SharpnessBody {
        xi: 1.0,
        v0: [[1.0, 0.0], [0.0, 0.0]],
        t_grid: sharp_t,
        report: sharp_report,
    };

    let mode_limit = {
        let bounds = zones::boundaries(&model, 1.0);
        if bounds.t2.is_finite() {
            match verify::mode_limit(&model, 1.0, &verify::default_t_schedule(&model, 1.0, 6)) {
                Ok(ml) => {
                    let report = ml.report();
                    pass_flags.insert("mode_limit".to_string(), report.passed());
                    Some(ModeLimitBody {
                        xi: ml.xi,
                        t_ref: ml.t_ref,
                        t_schedule: verify::default_t_schedule(&model, 1.0, 6),
                        predicted_det: ml.predicted_det,
                        w_samples: ml
                            .w_samples
                            .iter()
                            .map(|(t, w)| WSample {
                                t: *t,
                                w: mat2_row(w),
                            })
                            .collect(),
                        report,
                    })
                }
                Err(e) => {
                    notes.push(format!("mode limit skipped: {e}"));
                    None
                }
            }
        } else {
            notes.push("mode limit skipped: the hyperbolic zone never opens at xi = 1".into());
            None
        }
    };

    let all_pass = pass_flags.values().all(|&b| b);
    for (name, ok) in &pass_flags {
        eprintln!("{name}: {}", if *ok { "PASS" } else { "FAIL" });
    }
    for note in &notes {
        eprintln!("note: {note}");
    }

    let mut csvs = check_csvs("report_check", &check);
    let mut zcsv = Csv::new(&["xi", "t1", "t2"]);
    for r in &zone_rows {
        zcsv.row(&[r.xi, r.t1, r.t2]);
    }
    csvs.push(("report_zones".to_string(), zcsv.finish()));
    for b in &bands {
        csvs.push((
            format!("report_band_{}", b.zone),
            curve_csv("t", "scaled_norm", &b.curve),
        ));
    }
    csvs.extend(report_curve_csvs("report_decay", &decay.report));
    csvs.extend(report_curve_csvs("report_sharpness", &sharpness.report));
    if let Some(ml) = &mode_limit {
        csvs.extend(report_curve_csvs("report_mode_limit", &ml.report));
    }

    let body = ReportBody {
        horizon: args.horizon,
        check,
        zone_constant,
        zones: zone_rows,
        bands,
        decay,
        sharpness,
        mode_limit,
        pass_flags,
        notes,
    };
    emit(
        &ReportEnvelope::new("report", config, args.output.seed, body),
        &args.output,
        &csvs,
    )?;
    Ok(if all_pass { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs_parse() {
        let g = parse_grid("log:1e-2:1e2:5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[4] - 1e2).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-12);

        let g = parse_grid("lin:0:10:11").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 3.0);

        let g = parse_grid("0.5,1,5").unwrap();
        assert_eq!(g, vec![0.5, 1.0, 5.0]);

        assert!(parse_grid("log:0:1:5").is_err());
        assert!(parse_grid("log:1:10:1").is_err());
        assert!(parse_grid("5,4").is_err());
        assert!(parse_grid("nonsense:1:2:3").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn v0_parses_real_and_complex() {
        let v = parse_v0("1,0").unwrap();
        assert_eq!(v[0], Complex64::ONE);
        assert_eq!(v[1], Complex64::ZERO);
        let v = parse_v0("1,2,3,4").unwrap();
        assert_eq!(v[0], Complex64::new(1.0, 2.0));
        assert_eq!(v[1], Complex64::new(3.0, 4.0));
        assert!(parse_v0("0,0").is_err());
        assert!(parse_v0("1").is_err());
        assert!(parse_v0("a,b").is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        for argv in [
            vec!["zonewave", "examples"],
            vec!["zonewave", "check", "m.json", "--horizon", "1e5"],
            vec!["zonewave", "zones", "m.json", "--xi-grid", "log:1e-3:10:7"],
            vec!["zonewave", "solve", "m.json", "--xi", "1", "--t", "100"],
            vec!["zonewave", "solve", "m.json", "--xi", "1", "--t", "5", "--free"],
            vec!["zonewave", "diagonalize", "m.json", "--xi", "1", "--s", "auto", "--t", "1000"],
            vec!["zonewave", "verify-decay", "m.json"],
            vec!["zonewave", "verify-sharpness", "m.json", "--xi", "1", "--v0", "1,0"],
            vec!["zonewave", "mode-limit", "m.json", "--xi", "1"],
            vec!["zonewave", "report", "m.json"],
        ] {
            Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
        }
        // --free and --sigma-off are mutually exclusive
        assert!(Cli::try_parse_from([
            "zonewave", "solve", "m.json", "--xi", "1", "--t", "5", "--free", "--sigma-off"
        ])
        .is_err());
    }
}
