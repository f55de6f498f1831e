fn main() {
    std::process::exit(ganduf::cli::run_cli(std::env::args_os()));
}
