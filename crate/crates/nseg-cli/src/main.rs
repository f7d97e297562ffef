use std::process::ExitCode;

fn main() -> ExitCode {
    nseg_cli::run()
}
