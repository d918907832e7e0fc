//! Command-line front end: edge, certify, density, mc, and clt commands
//! over row files.
//!
//! Exit codes: 0 success, 2 input parse/validation failure, 3 numeric
//! failure, 4 hypothesis violation under `certify --strict`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::certificate::{certify_with, CertError};
use crate::conv::{
    convolution_density, support_edge_with, ConvError, DensityOptions, EdgeOptions, RowSpec, Side,
};
use crate::measure::AtomicMeasure;
use crate::mc::{edge_gap_report, sample_sum_spectrum, McConfig, McError};
use crate::rowfile::{self, RowFileError};
use crate::transform::TransformError;

#[derive(Debug)]
enum CliError {
    Input(String),
    Numeric(String),
    HypothesisViolation,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::HypothesisViolation => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
            CliError::HypothesisViolation => write!(f, "hypothesis check failed under --strict"),
        }
    }
}

impl From<RowFileError> for CliError {
    fn from(e: RowFileError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConvError> for CliError {
    fn from(e: ConvError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<CertError> for CliError {
    fn from(e: CertError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "freeprob",
    version,
    about = "Free additive convolution: support edges, certificates, densities, and Monte Carlo cross-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate a support edge of the row defined in FILE
    Edge(EdgeArgs),
    /// Emit the superconvergence certificate for the row in FILE
    Certify(CertifyArgs),
    /// Recover the density of the row's convolution as CSV
    Density(DensityArgs),
    /// Sample spectra of Haar-rotated matrix sums and compare to the edge
    Mc(McArgs),
    /// Edge convergence table for normalized sums of one measure
    Clt(CltArgs),
}

#[derive(Args)]
struct EdgeArgs {
    /// Row file
    file: PathBuf,
    /// Which edge to locate
    #[arg(long, default_value = "right")]
    side: SideArg,
    /// Override the |K'| tolerance factor at the critical point
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SideArg {
    Right,
    Left,
}

#[derive(Args)]
struct CertifyArgs {
    /// Row file
    file: PathBuf,
    /// Constant for the informational T_n-based interval
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    /// Emit a single JSON-style object instead of key: value lines
    #[arg(long = "json-like")]
    json_like: bool,
    /// Exit with code 4 when the certificate hypotheses fail
    #[arg(long)]
    strict: bool,
    /// Sample count for the K-estimate inequalities
    #[arg(long, default_value_t = 64)]
    samples: usize,
}

#[derive(Args)]
struct DensityArgs {
    /// Row file
    file: PathBuf,
    /// Left end of the grid (defaults to just beyond the computed support)
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    /// Right end of the grid
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    /// Number of grid points
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Comma-separated decreasing epsilon sequence
    #[arg(long = "eps-list", default_value = "0.01,0.005,0.0025")]
    eps_list: String,
    /// Seed every grid point independently instead of continuing from the
    /// previous solution
    #[arg(long)]
    independent_seeds: bool,
    /// Write CSV here (atomically) instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Row file
    file: PathBuf,
    /// Matrix dimension
    #[arg(long = "N", default_value_t = 512)]
    n_dim: usize,
    /// Number of independent trials
    #[arg(long, default_value_t = 32)]
    trials: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the spectra CSV here (atomically)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CltArgs {
    /// File declaring exactly one measure (no row needed)
    #[arg(long = "measure-file")]
    measure_file: PathBuf,
    /// Comma-separated list of member counts
    #[arg(long = "n-list", default_value = "4,16,64,256")]
    n_list: String,
}

/// Parses arguments from the process environment and runs the command.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Edge(args) => cmd_edge(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Density(args) => cmd_density(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Clt(args) => cmd_clt(args),
    }
}

fn load_row(path: &Path) -> Result<RowSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file = rowfile::parse(&text).map_err(RowFileError::from)?;
    let lowered = rowfile::lower(&file)?;
    lowered
        .row
        .ok_or_else(|| CliError::Input(format!("{}: no row declared", path.display())))
}

fn cmd_edge(args: EdgeArgs) -> Result<(), CliError> {
    let row = load_row(&args.file)?;
    let side = match args.side {
        SideArg::Right => Side::Right,
        SideArg::Left => Side::Left,
    };
    let mut opts = EdgeOptions::default();
    if let Some(tol) = args.tol {
        opts.kprime_tol_factor = tol;
    }
    let report = support_edge_with(&row, side, &opts)?;
    print!(
        "side: {}\nedge: {:.17e}\nerror_bound: {:.17e}\nmode: {}\nw_star: {}\n",
        report.side,
        report.edge,
        report.error_bound,
        report.mode,
        match report.w_star {
            Some(w) => format!("{w:.17e}"),
            None => "none".to_string(),
        }
    );
    Ok(())
}

fn cmd_certify(args: CertifyArgs) -> Result<(), CliError> {
    let row = load_row(&args.file)?;
    let cert = certify_with(&row, args.c, args.samples)?;
    if args.json_like {
        println!("{}", cert.to_json_like());
    } else {
        print!("{}", cert.to_record());
    }
    if args.strict && !cert.thm2_pass {
        return Err(CliError::HypothesisViolation);
    }
    Ok(())
}

fn parse_eps_list(text: &str) -> Result<Vec<f64>, CliError> {
    let eps: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    eps.map_err(|e| CliError::Input(format!("bad --eps-list: {e}")))
}

fn cmd_density(args: DensityArgs) -> Result<(), CliError> {
    let row = load_row(&args.file)?;
    let eps = parse_eps_list(&args.eps_list)?;
    if args.points < 2 {
        return Err(CliError::Input("--points must be at least 2".into()));
    }
    let (xmin, xmax) = match (args.xmin, args.xmax) {
        (Some(a), Some(b)) if a < b => (a, b),
        (Some(a), Some(b)) => {
            return Err(CliError::Input(format!("empty grid [{a}, {b}]")));
        }
        _ => {
            // Pad the computed support by 5% of its span on each side.
            let right = support_edge_with(&row, Side::Right, &EdgeOptions::default())?;
            let left = support_edge_with(&row, Side::Left, &EdgeOptions::default())?;
            let span = (right.edge - left.edge).max(1e-6);
            (
                args.xmin.unwrap_or(left.edge - 0.05 * span),
                args.xmax.unwrap_or(right.edge + 0.05 * span),
            )
        }
    };
    let step = (xmax - xmin) / (args.points as f64 - 1.0);
    let xs: Vec<f64> = (0..args.points).map(|i| xmin + step * i as f64).collect();
    let opts = DensityOptions {
        continuation: !args.independent_seeds,
        ..Default::default()
    };
    let grid = convolution_density(&row, &xs, &eps, &opts)?;
    emit(args.out.as_deref(), &grid.to_csv())
}

fn cmd_mc(args: McArgs) -> Result<(), CliError> {
    let row = load_row(&args.file)?;
    let cert = certify_with(&row, 5.0, 16)?;
    let cfg = McConfig {
        n_dim: args.n_dim,
        trials: args.trials,
        seed: args.seed,
        row,
    };
    let spectra = sample_sum_spectrum(&cfg)?;
    if let Some(path) = &args.out {
        write_atomic(path, &spectra.to_csv())?;
    }
    let report = edge_gap_report(&spectra, &cert);
    print!("{}", report.to_record());
    Ok(())
}

fn cmd_clt(args: CltArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.measure_file)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.measure_file.display())))?;
    let file = rowfile::parse(&text).map_err(RowFileError::from)?;
    let lowered = rowfile::lower(&file)?;
    if lowered.measures.len() != 1 {
        return Err(CliError::Input(format!(
            "{}: expected exactly one measure, found {}",
            args.measure_file.display(),
            lowered.measures.len()
        )));
    }
    let base: &AtomicMeasure = &lowered.measures[0].1;
    let a2 = base.moments(2).get(2);
    let limit_edge = 2.0 * a2.sqrt();
    let ns: Result<Vec<u64>, _> = args
        .n_list
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect();
    let ns = ns.map_err(|e| CliError::Input(format!("bad --n-list: {e}")))?;
    println!("n,edge,gap");
    for n in ns {
        if n == 0 {
            return Err(CliError::Input("counts in --n-list must be positive".into()));
        }
        let row = RowSpec::scaled_copies("clt", base, n, 1.0 / (n as f64).sqrt())?;
        let report = support_edge_with(&row, Side::Right, &EdgeOptions::default())?;
        println!(
            "{n},{:.16e},{:.16e}",
            report.edge,
            (report.edge - limit_edge).abs()
        );
    }
    Ok(())
}

fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Writes through a temporary file in the same directory and renames.
fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, content)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CliError::Numeric(format!("writing {}: {e}", path.display())))
}
