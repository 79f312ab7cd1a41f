fn main() {
    std::process::exit(continual_counting::cli::main_with_args(std::env::args_os()));
}
