fn main() {
    std::process::exit(spaceiv::cli::main_with_args(std::env::args_os()));
}
