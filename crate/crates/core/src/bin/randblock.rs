fn main() {
    std::process::exit(randblock::cli::main_with_args(std::env::args_os()));
}
