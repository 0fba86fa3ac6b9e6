use clap::Parser;
use magnetofisher::cli::{run, Args};

fn main() {
    std::process::exit(run(&Args::parse()));
}
