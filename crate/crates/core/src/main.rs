fn main() {
    std::process::exit(cad::cli::run(std::env::args_os()));
}
