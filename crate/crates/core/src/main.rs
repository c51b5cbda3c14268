use clap::Parser;

fn main() {
    std::process::exit(kgdamp::cli::main_with(kgdamp::cli::Args::parse()));
}
