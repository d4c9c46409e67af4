use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    deltaconv::cli::main(deltaconv::cli::Cli::parse())
}
