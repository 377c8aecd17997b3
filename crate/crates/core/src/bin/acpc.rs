fn main() {
    std::process::exit(acpc::cli::main_with_args(std::env::args_os()));
}
