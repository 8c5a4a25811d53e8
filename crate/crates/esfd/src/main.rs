fn main() {
    std::process::exit(esfd::cli::run_cli(std::env::args()));
}
