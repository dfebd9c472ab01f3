use clap::Parser;

fn main() {
    let cli = fracbat_cli::Cli::parse();
    if let Err(e) = fracbat_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
