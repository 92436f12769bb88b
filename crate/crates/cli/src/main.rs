//! `blocksparse`: generate instances, solve them, and benchmark the
//! block-sparse regularizers.
//!
//! Exit status is 0 on success, 1 on a solver or I/O failure and 2 on a
//! configuration error.

mod commands;
mod config;
mod error;
mod instance_io;
mod method;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "blocksparse", version, about = "Block-sparse signal recovery with latent partition penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Write a seeded instance to `instance.txt`.
    Generate,
    /// Solve one instance with one method.
    Solve,
    /// Repeated seeded trials over the selected methods.
    Bench,
    /// A benchmark for every value of one parameter.
    Sweep,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.overrides.resolve()?;
    let out = cli.overrides.out_dir();
    match cli.command {
        Command::Generate => commands::generate(&config, &out),
        Command::Solve => commands::solve(&config, &out),
        Command::Bench => commands::bench(&config, &out),
        Command::Sweep => commands::sweep(&config, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("blocksparse: {e}");
        std::process::exit(e.exit_code());
    }
}
