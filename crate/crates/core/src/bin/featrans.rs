fn main() {
    std::process::exit(featrans::cli::main_with_args(std::env::args_os()));
}
