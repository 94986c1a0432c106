fn main() {
    std::process::exit(emperor::cli::run_cli(std::env::args_os()));
}
