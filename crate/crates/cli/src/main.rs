use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rydgate_cli::{execute, Command, Format, Invocation};

#[derive(Parser)]
#[command(name = "rydgate", version, about = "Rydberg-blockade phase gates driven by zero-area pulses")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in configuration: fig2, fig3, fig4, fig5.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Format of tabular outputs; summaries are always JSON.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, env = "RYD_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Phase and population traces of |01> and |11>.
    Dynamics,
    /// Parameter-plane grids.
    Sweep,
    /// Solve Omega_0 and V for the phase targets.
    Optimize,
    /// Sensitivity curves and Monte-Carlo fidelity.
    Noise,
    /// Cross-validation battery.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Dynamics => Command::Dynamics,
        Cmd::Sweep => Command::Sweep,
        Cmd::Optimize => Command::Optimize,
        Cmd::Noise => Command::Noise,
        Cmd::Check => Command::Check,
    };
    let inv = Invocation {
        command,
        config: cli.config,
        preset: cli.preset,
        out: cli.out,
        format: cli.format,
        seed: cli.seed,
        threads: cli.threads,
    };
    match execute(&inv) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            println!("wrote {} files to {}", report.files.len() + 1, inv.out.display());
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    eprintln!("error: {f}");
                }
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
