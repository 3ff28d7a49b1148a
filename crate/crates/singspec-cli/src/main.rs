//! `singspec` command-line interface.

mod commands;
mod input;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{Envelope, Report, Timing};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid {what}: {detail}")]
    Schema { what: &'static str, detail: String, schema: &'static str },
    #[error(transparent)]
    Domain(#[from] singspec::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } => 2,
            CliError::Domain(_) | CliError::Output(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "singspec", version, about = "Deficiency numbers, self-adjoint extensions and spectra of one-term operators with an interior singularity")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form and constructive deficiency numbers.
    Deficiency(DeficiencyArgs),
    /// Frobenius fundamental system: exponents, log degrees and leading terms.
    FundamentalSystem(FundamentalArgs),
    /// Form-limit constants and the zero pattern over k.
    Forms(FormsArgs),
    /// Check a boundary-condition set for self-adjointness.
    ValidateBc(ValidateArgs),
    /// Eigenvalues and the characteristic-determinant scan.
    Spectrum(SpectrumArgs),
    /// Limit of the discreteness criterion.
    Discreteness(DiscretenessArgs),
    /// Formula against constructive count over the whole (m, p, q) grid.
    Sweep(SweepArgs),
}

/// Operator selection: a spec file or inline orders and coefficients.
#[derive(Args, Debug)]
pub struct SpecArgs {
    /// JSON operator spec (m, p, q, a, b, trunc, lambda).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// Order of vanishing on the right.
    #[arg(long)]
    p: Option<usize>,
    /// Order of vanishing on the left (defaults to p).
    #[arg(long)]
    q: Option<usize>,
    /// Coefficients of a(x), comma separated ("1,1/2,-3").
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Coefficients of b(x), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Series truncation (overrides the spec file and SINGSPEC_TRUNC).
    #[arg(long)]
    trunc: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Left,
    Right,
    Both,
}

#[derive(Args, Debug)]
pub struct DeficiencyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Nonreal spectral parameter "re,im" (default 0,1).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
}

#[derive(Args, Debug)]
pub struct FundamentalArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Spectral parameter "re,im" (default 0).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, value_enum, default_value_t = SideArg::Both)]
    side: SideArg,
    /// Number of leading offsets listed per member.
    #[arg(long, default_value_t = 6)]
    terms: usize,
}

#[derive(Args, Debug)]
pub struct FormsArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = SideArg::Both)]
    side: SideArg,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// JSON boundary conditions (a1, b1, b2, a2 as [re, im] matrices).
    #[arg(long)]
    bc: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpectrumTable {
    Eigenvalues,
    Scan,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    bc: PathBuf,
    /// Scan interval LO HI.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], required = true, allow_hyphen_values = true)]
    range: Vec<f64>,
    /// Number of scan points.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Bracket width at which bisection stops.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Matching point distance from 0.
    #[arg(long)]
    delta: Option<f64>,
    /// Evaluate scan points on one thread.
    #[arg(long)]
    sequential: bool,
    /// Table written in CSV mode.
    #[arg(long, value_enum, default_value_t = SpectrumTable::Eigenvalues)]
    table: SpectrumTable,
}

#[derive(Args, Debug)]
pub struct DiscretenessArgs {
    #[arg(long)]
    m: usize,
    /// Order of vanishing of the coefficient.
    #[arg(long)]
    p: usize,
    /// Coefficients of a(x), comma separated (default 1).
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Largest m of the grid.
    #[arg(long, default_value_t = 3)]
    m_max: usize,
    #[arg(long)]
    sequential: bool,
}

fn dispatch(cmd: &Command) -> Result<(&'static str, Report), CliError> {
    Ok(match cmd {
        Command::Deficiency(a) => ("deficiency", commands::deficiency(a)?),
        Command::FundamentalSystem(a) => ("fundamental-system", commands::fundamental_system(a)?),
        Command::Forms(a) => ("forms", commands::forms(a)?),
        Command::ValidateBc(a) => ("validate-bc", commands::validate_bc(a)?),
        Command::Spectrum(a) => ("spectrum", commands::spectrum(a)?),
        Command::Discreteness(a) => ("discreteness", commands::discreteness(a)?),
        Command::Sweep(a) => ("sweep", commands::sweep_grid(a)?),
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (command, report) = dispatch(&cli.command)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.format {
        Format::Csv => output::write_csv(&mut out, &report.table),
        Format::Json => {
            let env = Envelope {
                command: command.to_string(),
                inputs: report.inputs,
                outputs: report.outputs,
                diagnostics: report.diagnostics,
                versions: output::versions(),
                timing: Timing { elapsed_ms: start.elapsed().as_secs_f64() * 1e3 },
            };
            output::write_json(&mut out, &env)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 2 {
                eprintln!("\ninput files: see `singspec <command> --help`; spec files follow schemas/spec-file.schema.json, boundary conditions schemas/bc-file.schema.json");
            }
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let mut stderr = std::io::stderr().lock();
            let body = serde_json::json!({"error": err.to_string(), "exit_code": err.exit_code()});
            let _ = writeln!(stderr, "{body}");
            if let CliError::Schema { schema, .. } = &err {
                let _ = writeln!(stderr, "expected schema:\n{schema}");
            }
            ExitCode::from(err.exit_code())
        }
    }
}
