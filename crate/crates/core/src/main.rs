fn main() {
    std::process::exit(beamsched::cli::main_with_args(std::env::args_os()));
}
