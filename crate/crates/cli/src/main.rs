use std::process::ExitCode;

use multiscan_cli::{parse_args, run};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let config = match parse_args(&argv) {
        Ok(c) => c,
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return if clap_err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
            }
            eprintln!("error: {:#}", e);
            return ExitCode::from(1);
        }
    };
    match run(&config, &argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
