use std::process::ExitCode;

fn main() -> ExitCode {
    freeprob::cli::main_entry()
}
