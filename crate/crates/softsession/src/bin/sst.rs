fn main() {
    std::process::exit(softsession::frontend::run_cli(std::env::args()));
}
