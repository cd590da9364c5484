use std::process::ExitCode;

use clap::Parser;
use linkbound::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
