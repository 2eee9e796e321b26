fn main() {
    std::process::exit(orlomo::cli::main_with_args(std::env::args_os()));
}
