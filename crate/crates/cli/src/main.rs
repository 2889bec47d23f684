use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehrsym::report::Report;
use ehrsym::todd::OperatorKind;
use ehrsym::{Error, ErrorCategory};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "ehrsym", version, about = "Weighted lattice sums, Euler-Maclaurin remainders and regularized constants on lattice polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for the numeric kernels (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Unweighted,
    Half,
}

impl From<KindArg> for OperatorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Unweighted => OperatorKind::Unweighted,
            KindArg::Half => OperatorKind::Half,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Limit,
    Tail,
    Direct,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Polytope file (JSON with `dim` and `facets`).
    #[arg(long)]
    pub polytope: PathBuf,
    /// Symbol text, or `@PATH` to read it from a file.
    #[arg(long)]
    pub symbol: Option<String>,
    #[arg(long, value_enum, default_value_t = KindArg::Unweighted)]
    pub kind: KindArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lattice points of N·P, plain and weighted.
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: i64,
    },
    /// Checks the exact Todd-operator identity for N = 1..Nmax.
    VerifyKp {
        #[command(flatten)]
        common: Common,
        #[arg(long = "Nmax", default_value_t = 10)]
        n_max: i64,
    },
    /// Exact Ehrhart polynomial of a polynomial weight.
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Asymptotic ladder of the weighted sum minus the integral.
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        j: Option<i64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Truncate the ladder below this exponent.
        #[arg(long, allow_hyphen_values = true)]
        truncate: Option<f64>,
    },
    /// The regularized constant C (or C(s) with --gauge).
    Constant {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MethodArg::Limit)]
        method: MethodArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        j: Option<i64>,
        /// Comma-separated gauge values s.
        #[arg(long, allow_hyphen_values = true)]
        gauge: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// One Richardson step on the limit sequence.
        #[arg(long)]
        richardson: bool,
    },
    /// Polytope and symbol summary.
    Info {
        #[arg(long)]
        polytope: Option<PathBuf>,
        #[arg(long)]
        symbol: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        j: Option<i64>,
    },
}

/// Distinguishes a failed identity check from an error.
pub struct Outcome {
    pub report: Report,
    pub pass: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Input => 2,
        ErrorCategory::Precondition => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    let mut out = match cli.command {
        Command::Count { common, n } => commands::count(&common, n)?,
        Command::VerifyKp { common, n_max } => commands::verify_kp(&common, n_max)?,
        Command::Fit { common } => commands::fit(&common)?,
        Command::Expand {
            common,
            k,
            j,
            tol,
            truncate,
        } => commands::expand(&common, k, j, tol, truncate)?,
        Command::Constant {
            common,
            method,
            k,
            j,
            gauge,
            tol,
            seed,
            richardson,
        } => commands::constant(
            &common,
            &commands::ConstantArgs {
                method,
                k,
                j,
                gauge,
                tol,
                seed,
                richardson,
            },
        )?,
        Command::Info { polytope, symbol, j } => commands::info(polytope.as_deref(), symbol.as_deref(), j)?,
    };
    out.report.set("threads", threads);
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match run(cli) {
        Ok(out) => {
            match format {
                Format::Table => print!("{}", out.report.to_table()),
                Format::Json => print!("{}", out.report.to_json()),
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
