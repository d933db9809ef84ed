fn main() {
    std::process::exit(chiral_core::cli::main_with_args(std::env::args_os()));
}
