fn main() {
    std::process::exit(fairslot_cli::cli::main_with_args(std::env::args_os()));
}
