use clap::Parser;
use rsh_rank::cli::{main_with, CliArgs};

fn main() {
    std::process::exit(main_with(&CliArgs::parse()));
}
