fn main() {
    std::process::exit(icfringe::cli::main_with_args(std::env::args_os()));
}
