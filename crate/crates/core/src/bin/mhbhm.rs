use std::process::ExitCode;

fn main() -> ExitCode {
    match mhbhm::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", mhbhm::cli::error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
