fn main() {
    std::process::exit(morphfront_cli::run_cli(std::env::args_os()));
}
