fn main() {
    std::process::exit(beltrami_cli::main_with_args(std::env::args_os()));
}
