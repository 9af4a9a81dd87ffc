fn main() {
    std::process::exit(oqe::cli::main_with_args(std::env::args_os()));
}
