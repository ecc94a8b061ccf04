use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    match cmu_jm::cli::main_with_args(std::env::args_os()) {
        Ok(Some(out)) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            eprintln!("cmu-jm: {}", msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("error"));
            ExitCode::from(2)
        }
    }
}
