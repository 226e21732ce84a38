use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use charflow::cli::{run, Cli, EXIT_INPUT};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(raw) = std::env::var("CHARFLOW_THREADS") {
        let threads = match raw.trim().parse::<usize>() {
            Ok(t) if t > 0 => t,
            _ => {
                eprintln!("error: CHARFLOW_THREADS must be a positive integer, got {raw:?}");
                return ExitCode::from(EXIT_INPUT as u8);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    }
    let out = run(&cli);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
