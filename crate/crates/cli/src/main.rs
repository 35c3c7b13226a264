fn main() {
    std::process::exit(flex_cli::main_with_args(std::env::args_os()));
}
