use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entroflux::cli::{cmd_binning, cmd_oracle, cmd_simulate, cmd_sweep, exit_code};

#[derive(Parser)]
#[command(name = "entroflux", version, about = "Wavepacket information-entropy balance diagnostics")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Paths {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a wavepacket and write series.csv and summary.json.
    Simulate(Paths),
    /// Run the classical-limit sweep and write sweep.csv.
    Sweep(Paths),
    /// Evaluate the closed-form fields with the simulate schema.
    Oracle(Paths),
    /// Binned-entropy convergence study; writes binning.csv.
    Binning(Paths),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(p) => cmd_simulate(&p.config, &p.out, cli.quiet),
        Command::Sweep(p) => cmd_sweep(&p.config, &p.out, cli.quiet),
        Command::Oracle(p) => cmd_oracle(&p.config, &p.out, cli.quiet),
        Command::Binning(p) => cmd_binning(&p.config, &p.out, cli.quiet),
    };
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&outcome))
}
