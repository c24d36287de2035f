use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sdmqkd::cli::{run, Command, Invocation, OutputFormat};

#[derive(Parser)]
#[command(name = "sdmqkd", version, about = "Parallel decoy-state BB84 over multicore fiber")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run a Monte Carlo session and write statistics and key rates
    Simulate(Args),
    /// Re-sift a pulse log and recompute the key-rate report
    Analyze(Args),
    /// Prepare-and-measure tomography in both bases
    Tomography(Args),
    /// Closed-form multiplexing rate sweep
    Compare(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Analyze(a) => (Command::Analyze, a),
        Sub::Tomography(a) => (Command::Tomography, a),
        Sub::Compare(a) => (Command::Compare, a),
    };
    let inv = Invocation {
        command,
        config_path: args.config,
        out: args.out,
        seed: args.seed,
        format: args.format.map(|f| match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }),
    };
    match run(&inv) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", summary.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
