mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Conjugate phase retrieval with real frames.
#[derive(Parser, Debug)]
#[command(name = "cpr", version)]
pub struct Cli {
    /// Emit exactly one JSON document on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a Gaussian (or cone) frame.
    Gen(GenArgs),
    /// Decide whether a real frame does conjugate phase retrieval.
    Certify(CertifyArgs),
    /// Compute |<x, phi_n>|^2 for a signal, or for both signals of a witness pair.
    Measure(MeasureArgs),
    /// Recover a signal from its measurements.
    Reconstruct(ReconstructArgs),
    /// Look for a pair of inequivalent signals with equal measurements.
    Falsify(FalsifyArgs),
    /// Build a witness pair realizing a given indefinite matrix.
    Witness(WitnessArgs),
    /// Check whether a frame is strictly conjugate retrievable.
    Strict(StrictArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Equally spaced vectors on the cone x1^2 + x2^2 = x3^2 (requires --m 3).
    #[arg(long)]
    pub cone: bool,
    /// Output path; `.csv` writes CSV, anything else JSON.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    pub frame: PathBuf,
    /// Run the randomized witness search with this many restarts when the
    /// exact tests are inconclusive (M >= 4).
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = cpr_core::certify::KERNEL_TOL)]
    pub kernel_tol: f64,
    #[arg(long, default_value_t = cpr_core::certify::DET_TOL)]
    pub det_tol: f64,
    /// Also write the certificate here.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    pub frame: PathBuf,
    /// Signal file, or a witness pair file.
    pub signal: PathBuf,
    /// Relative noise level: values get N(0, (sigma * mean b)^2) added.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Linear,
    Altproj,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    pub frame: PathBuf,
    pub measurements: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Linear)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// PSD tolerance (linear) or convergence tolerance (altproj).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Exit with status 3 when the result did not converge.
    #[arg(long)]
    pub strict: bool,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FalsifyArgs {
    pub frame: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct WitnessTarget {
    /// Target diag(a, b, -c); b = 0 selects the degenerate pattern.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub diag: Option<Vec<f64>>,
    /// Target diag(a, -c) in dimension 2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub diag2: Option<Vec<f64>>,
    /// Symmetric 2x2 or 3x3 target matrix file.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub target: WitnessTarget,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StrictArgs {
    pub frame: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

/// What a command hands back for printing.
pub struct Output {
    pub json: Value,
    pub text: String,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(cpr_core::Error),
}

impl From<cpr_core::Error> for CliError {
    fn from(e: cpr_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Usage(msg) => json!({ "error": { "code": "E_USAGE", "message": msg } }),
            CliError::Core(cpr_core::Error::Format(f)) => json!({
                "error": { "code": f.code.as_str(), "field": f.field, "message": f.message }
            }),
            CliError::Core(e) => {
                let debug = format!("{e:?}");
                let name: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
                json!({ "error": { "code": name, "message": e.to_string() } })
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CPR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("CPR_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json_requested = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help / --version
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_requested {
                print_json(&json!({ "error": { "code": "E_USAGE", "message": e.kind().to_string() } }));
            }
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let result = configure_threads().and_then(|_| commands::run(&cli.command));
    match result {
        Ok(out) => {
            if cli.json {
                print_json(&out.json);
            } else {
                print!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.json {
                print_json(&e.to_json());
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
