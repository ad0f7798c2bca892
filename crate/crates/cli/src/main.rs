use besov_sparse_cli::args::Cli;
use besov_sparse_cli::commands::{configure_threads, execute};
use besov_sparse_cli::exit;
use clap::error::ErrorKind;
use clap::Parser;

fn run() -> i32 {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::PARAMETER,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.code;
    }
    match execute(cli, &argv) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn main() {
    std::process::exit(run());
}
