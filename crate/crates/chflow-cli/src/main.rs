use std::process::exit;

fn main() {
    exit(chflow_cli::run_from(std::env::args_os()));
}
