use clap::Parser;

fn main() {
    let cli = irskg::cli::Cli::parse();
    std::process::exit(irskg::cli::run(cli));
}
