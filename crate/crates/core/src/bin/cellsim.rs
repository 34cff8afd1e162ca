fn main() {
    std::process::exit(cellsim::cli::run(std::env::args_os()));
}
