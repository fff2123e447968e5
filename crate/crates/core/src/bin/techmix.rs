fn main() {
    std::process::exit(techmix::cli::main_from_args(std::env::args_os()));
}
