fn main() {
    std::process::exit(psynth::cli::main_with_args(std::env::args_os()));
}
