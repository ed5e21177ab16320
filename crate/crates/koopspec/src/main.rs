fn main() {
    std::process::exit(koopspec::cli::run_from_args(std::env::args_os()));
}
