use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use me2ph_cli::commands::{cmd_convert, cmd_pdf, cmd_validate, ConvertArgs, ValidateArgs};
use me2ph_cli::{parse_grid, Failure};

/// Converts matrix-exponential distributions to Markovian phase-type form.
#[derive(Parser)]
#[command(name = "me2ph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the conversion and write a PH file; prints the step report.
    Convert {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Use the rounded hand-derived tail constants of the worked example.
        #[arg(long)]
        paper_bounds: bool,
        /// Abort when the final order would exceed this.
        #[arg(long, default_value_t = 10_000_000)]
        max_order: usize,
    },
    /// Check structure, the dominant eigenvalue and positive density
    /// conditions, and optionally equivalence; prints a JSON verdict.
    Validate {
        input: PathBuf,
        /// ME or PH file to compare densities and moments against.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Comparison grid `start:stop:count`.
        #[arg(long, default_value = "0.2:10:50")]
        grid: String,
        /// Relative tolerance of the equivalence verdict.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulated absorption times for a Kolmogorov-Smirnov check of a PH file.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Print `x,pdf` rows on a grid `start:stop:count`.
    Pdf {
        input: PathBuf,
        #[arg(long)]
        grid: String,
    },
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Convert { input, output, paper_bounds, max_order } => cmd_convert(&ConvertArgs {
            input: &input,
            output: &output,
            paper_bounds,
            max_order,
        }),
        Command::Validate { input, against, grid, tol, seed, samples } => cmd_validate(&ValidateArgs {
            input: &input,
            against: against.as_deref(),
            grid: parse_grid(&grid)?,
            tol,
            seed,
            samples,
        }),
        Command::Pdf { input, grid } => cmd_pdf(&input, &parse_grid(&grid)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
