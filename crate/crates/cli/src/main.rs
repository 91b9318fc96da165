use clap::Parser;

fn main() {
    let cli = cps_cli::Cli::parse();
    if let Err(e) = cps_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
