use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sadcluster::cli::Cli::parse();
    if let Ok(threads) = std::env::var("SADCLUSTER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                let err = sadcluster::Error::InvalidArgument(format!("SADCLUSTER_THREADS={threads:?}"));
                eprintln!("{}", sadcluster::cli::error_json(&err));
                return ExitCode::FAILURE;
            }
        }
    }
    match sadcluster::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", sadcluster::cli::error_json(&err));
            ExitCode::FAILURE
        }
    }
}
