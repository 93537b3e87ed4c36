fn main() {
    std::process::exit(lddmm::cli::main_with_args(std::env::args_os()));
}
