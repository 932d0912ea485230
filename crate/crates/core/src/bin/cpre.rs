fn main() {
    std::process::exit(cpre_core::cli::main_with(std::env::args_os()));
}
