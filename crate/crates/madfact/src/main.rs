use clap::Parser;

fn main() {
    let cli = madfact::cli::Cli::parse();
    if let Err(error) = madfact::cli::run(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
