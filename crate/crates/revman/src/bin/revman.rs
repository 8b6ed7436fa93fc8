fn main() {
    std::process::exit(revman::cli::cli_dispatch(std::env::args()));
}
