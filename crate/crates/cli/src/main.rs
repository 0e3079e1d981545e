use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use winner_cli::{cmd_report, cmd_simulate, cmd_verify, print_verdicts, RunOptions};
use winner_core::scenario::Overrides;

/// Simulate triangular-array point processes and check their argmax, max
/// and ladder functionals against closed-form limit laws.
#[derive(Parser)]
#[command(name = "winner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write raw draws (argmax, maxima, ladder values, configurations) as CSV.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run every experiment and exit 0 iff all verdicts pass.
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Condense report files of a directory into one summary table.
    Report { dir: PathBuf },
}

/// Flags override the scenario field of the same name.
#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    /// Row size; repeat to list several. Replaces `n` of every experiment.
    #[arg(long = "n")]
    n: Vec<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed from OS entropy when the scenario has no seed and --seed is absent.
    #[arg(long)]
    allow_entropy: bool,
}

impl From<RunFlags> for RunOptions {
    fn from(f: RunFlags) -> Self {
        RunOptions {
            overrides: Overrides { seed: f.seed, n: f.n, replicates: f.replicates, alpha: f.alpha, output: f.out },
            allow_entropy: f.allow_entropy,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { scenario, flags } => cmd_simulate(&scenario, &flags.into()).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            0
        }),
        Command::Verify { scenario, flags } => cmd_verify(&scenario, &flags.into()).map(|v| {
            print_verdicts(&v.reports);
            println!("report: {}", v.report_path.display());
            println!("summary: {}", v.summary_path.display());
            if v.passed() {
                0
            } else {
                1
            }
        }),
        Command::Report { dir } => cmd_report(&dir).map(|table| {
            println!("{}", table.display());
            0
        }),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
