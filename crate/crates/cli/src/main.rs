// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod compare;
mod failure;
mod gen;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::{CliResult, Failure, Kind};

#[derive(Parser)]
#[command(name = "ipsim", version, about = "In-pixel patch projection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulated sensor pipeline and write feature files.
    Simulate(run::SimulateArgs),
    /// Compute reference features in exact arithmetic.
    Oracle(run::RunArgs),
    /// Compare two feature files.
    Compare(compare::CompareArgs),
    /// Timing, power and area report for the configured operating point.
    Report(report::ReportArgs),
    /// Write a synthetic test image.
    Gen(gen::GenArgs),
    /// Write a random weight bank.
    GenBank(gen::GenBankArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Bin,
    Csv,
}

/// Shared `--format` flag.
#[derive(Args, Debug, Clone)]
pub struct FormatArg {
    #[arg(long, value_enum, default_value_t = OutputFormat::Bin)]
    pub format: OutputFormat,
}

/// Caps the global rayon pool at `IPSIM_THREADS`.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("IPSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(Kind::Config, format!("IPSIM_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(Kind::Config, format!("thread pool: {e}")))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => run::simulate(a),
        Command::Oracle(a) => run::oracle(a),
        Command::Compare(a) => compare::compare(a),
        Command::Report(a) => report::report(a),
        Command::Gen(a) => gen::gen_image(a),
        Command::GenBank(a) => gen::gen_bank(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", Failure::new(Kind::Usage, first));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

pub fn require(opt: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    opt.ok_or_else(|| Failure::new(Kind::Usage, format!("missing {flag} (flag or config key)")))
}
