fn main() {
    std::process::exit(exitlab::harness::cli::run_cli(std::env::args_os()));
}
