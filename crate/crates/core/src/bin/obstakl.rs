fn main() {
    std::process::exit(obstakl::cli::main_with_args(std::env::args_os()));
}
