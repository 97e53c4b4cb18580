use clap::Parser;
use pipeattrib_cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run_cli(cli) {
        eprintln!("error: {:#}", failure.error);
        std::process::exit(failure.code);
    }
}
