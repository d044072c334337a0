use clap::Parser;

fn main() {
    let cli = leakcheck_cli::Cli::parse();
    std::process::exit(leakcheck_cli::main_with(&cli));
}
