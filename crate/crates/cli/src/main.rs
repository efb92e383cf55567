use std::process::ExitCode;

use urnn_cli::{configure_threads, run_from, THREADS_ENV};

fn main() -> ExitCode {
    let threads = std::env::var(THREADS_ENV).ok();
    if let Err(f) = configure_threads(threads.as_deref()) {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let code = run_from(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
