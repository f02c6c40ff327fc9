use std::process::ExitCode;

use clap::Parser;
use tae_server::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
