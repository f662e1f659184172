use clap::Parser;

fn main() {
    std::process::exit(qhermite::cli::run(qhermite::cli::CliConfig::parse()));
}
