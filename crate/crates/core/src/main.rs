use clap::Parser;

fn main() {
    let cli = wfsim::cli::Cli::parse();
    if let Err(e) = wfsim::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
