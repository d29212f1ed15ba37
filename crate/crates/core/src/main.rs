fn main() {
    std::process::exit(macrobell::cli::main_with_args(std::env::args_os()));
}
