fn main() {
    std::process::exit(cubemax::cli::main_with_args(std::env::args()));
}
