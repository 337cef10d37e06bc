use clap::Parser;
use levi_hull_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
