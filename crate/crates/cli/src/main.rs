use clap::{Parser, Subcommand};

use mzsim_cli::config::CommandKind;
use mzsim_cli::{cmd_duality, cmd_sweep, parse_config, RunArgs};

#[derive(Parser)]
#[command(
    name = "mzsim",
    version,
    about = "Event-by-event delayed-choice interferometer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase sweep at fixed reflectivity; writes counts and a fit summary
    Sweep(RunArgs),
    /// Scan a reflectivity or voltage grid; writes counts and one
    /// visibility/distinguishability row per grid point
    Duality(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (label, result) = match &cli.command {
        Command::Sweep(args) => (
            "sweep",
            parse_config(args, CommandKind::Sweep).and_then(|spec| cmd_sweep(&spec)),
        ),
        Command::Duality(args) => (
            "duality",
            parse_config(args, CommandKind::Duality).and_then(|spec| cmd_duality(&spec)),
        ),
    };
    match result {
        Ok(paths) => {
            println!("{label}: wrote {}", paths.counts.display());
            println!("{label}: wrote {}", paths.summary.display());
            if let Some(trace) = &paths.trace {
                println!("{label}: wrote {}", trace.display());
            }
        }
        Err(e) => {
            eprintln!("mzsim {label}: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
