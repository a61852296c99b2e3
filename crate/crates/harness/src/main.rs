fn main() {
    std::process::exit(fcnet::cli::main_with_args(std::env::args_os()));
}
