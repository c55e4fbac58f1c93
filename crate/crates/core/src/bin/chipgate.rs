fn main() {
    std::process::exit(chipgate::cli::main_with_args(std::env::args_os()));
}
