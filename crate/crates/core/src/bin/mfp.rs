use clap::Parser;
use mfp_core::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
