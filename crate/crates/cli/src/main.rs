fn main() {
    std::process::exit(manifold_cli::main_with_args(std::env::args().collect()));
}
