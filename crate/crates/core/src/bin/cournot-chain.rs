use clap::Parser;
use cournot_core::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
