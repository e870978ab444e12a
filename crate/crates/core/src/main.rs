use clap::Parser;

fn main() {
    let cli = dtph::cli::Cli::parse();
    std::process::exit(dtph::cli::run(cli));
}
