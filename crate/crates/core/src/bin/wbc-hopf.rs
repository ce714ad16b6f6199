fn main() {
    std::process::exit(wbc_hopf::cli::main_with_args(std::env::args_os()));
}
