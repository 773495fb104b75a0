use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = brsim::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match brsim::cli::run(cli, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("brsim: {e}");
            ExitCode::from(match e {
                brsim::Error::Usage(_) | brsim::Error::Empty(_) => 2,
                _ => 1,
            })
        }
    }
}
