use clap::Parser;

fn main() {
    std::process::exit(mmse_cli::run(mmse_cli::Cli::parse()));
}
