use clap::Parser;

fn main() {
    let cli = implant::cli::Cli::parse();
    if let Err(e) = implant::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(implant::cli::exit_code(&e));
    }
}
