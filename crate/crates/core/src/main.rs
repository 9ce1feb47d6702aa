fn main() { std::process::exit(speedbump::cli::main_with_args(std::env::args_os())) }
